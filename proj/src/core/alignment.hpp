#pragma once

#include <functional>
#include <string>
#include <vector>

#include "core/sequences.hpp"

namespace msa::align {

using num::Matrix;
using seq::Corpus;
using seq::FeatureSequence;

// Monotonic warping path between two sequences. Starts at (0,0), ends at
// (lenA-1, lenB-1); each step advances i, j, or both by exactly 1.
struct AlignmentPath {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  double total_cost = 0.0;
};

using RowDistance = std::function<double(std::span<const double>, std::span<const double>)>;

double euclidean(std::span<const double> a, std::span<const double> b);
double abs_diff(std::span<const double> a, std::span<const double> b);

// Classic three-move DTW ({1,0},{0,1},{1,1}), no window, no slope
// constraint. Ties prefer the diagonal, then advancing in a, then in b.
AlignmentPath dtw_align(const Matrix& a, const Matrix& b, const RowDistance& dist);
AlignmentPath dtw_align(const std::vector<double>& a, const std::vector<double>& b);

struct WordTiming {
  std::string word;
  double start_s = 0.0, end_s = 0.0;
};

struct Word {
  std::string word;
  std::vector<double> features;  // acoustic prototype, dim = audio dim
};

// DTW the word prototypes against the audio frames; each word spans its
// matched frames. Frames matched by several words are split evenly in time
// so timings stay ordered and non-overlapping.
std::vector<WordTiming> forced_align_text_audio(const std::vector<Word>& words,
                                                const FeatureSequence& audio);

enum class CollapseFn { mean, max };

CollapseFn collapse_from_string(const std::string& s);
const char* collapse_name(CollapseFn f);

// Resample `other` onto the pivot timeline: rows whose interval midpoint
// falls in pivot bin k are collapsed into output row k; empty bins yield
// zero vectors. Output timestamps are the pivot's.
FeatureSequence pivot_align(const FeatureSequence& pivot, const FeatureSequence& other,
                            CollapseFn collapse);

// Pivot-align audio and video onto text for every segment.
Corpus align_corpus(const Corpus& corpus, CollapseFn collapse);

}  // namespace msa::align
