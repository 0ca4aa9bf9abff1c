#include "core/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "core/errors.hpp"

namespace msa::align {

double euclidean(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return std::sqrt(s);
}

double abs_diff(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += std::abs(a[k] - b[k]);
  return s;
}

AlignmentPath dtw_align(const Matrix& a, const Matrix& b, const RowDistance& dist) {
  const std::size_t n = a.rows(), m = b.rows();
  if (n == 0 || m == 0)
    throw ValidationError("dtw_align: both sequences must be non-empty");
  if (a.cols() != b.cols())
    throw ValidationError("dtw_align: feature dims differ (" + a.shape_str() + " vs " +
                          b.shape_str() + ")");

  std::vector<double> cost(n * m);
  std::vector<std::uint8_t> from(n * m);  // 0 diag, 1 up (advance a), 2 left (advance b)
  auto at = [m](std::size_t i, std::size_t j) { return i * m + j; };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double d = dist(a.row(i), b.row(j));
      if (i == 0 && j == 0) {
        cost[0] = d;
        continue;
      }
      double best = std::numeric_limits<double>::infinity();
      std::uint8_t move = 0;
      if (i > 0 && j > 0) {
        best = cost[at(i - 1, j - 1)];
        move = 0;
      }
      if (i > 0 && cost[at(i - 1, j)] < best) {
        best = cost[at(i - 1, j)];
        move = 1;
      }
      if (j > 0 && cost[at(i, j - 1)] < best) {
        best = cost[at(i, j - 1)];
        move = 2;
      }
      cost[at(i, j)] = d + best;
      from[at(i, j)] = move;
    }
  }

  AlignmentPath path;
  path.total_cost = cost[at(n - 1, m - 1)];
  std::size_t i = n - 1, j = m - 1;
  path.pairs.emplace_back(i, j);
  while (i > 0 || j > 0) {
    switch (from[at(i, j)]) {
      case 0: --i; --j; break;
      case 1: --i; break;
      default: --j; break;
    }
    path.pairs.emplace_back(i, j);
  }
  std::reverse(path.pairs.begin(), path.pairs.end());
  return path;
}

AlignmentPath dtw_align(const std::vector<double>& a, const std::vector<double>& b) {
  Matrix ma(a.size(), 1), mb(b.size(), 1);
  for (std::size_t i = 0; i < a.size(); ++i) ma(i, 0) = a[i];
  for (std::size_t i = 0; i < b.size(); ++i) mb(i, 0) = b[i];
  return dtw_align(ma, mb, abs_diff);
}

std::vector<WordTiming> forced_align_text_audio(const std::vector<Word>& words,
                                                const FeatureSequence& audio) {
  if (words.empty()) throw ValidationError("forced alignment needs at least one word");
  if (audio.length() == 0) throw ValidationError("forced alignment needs non-empty audio");
  for (const Word& w : words)
    if (w.features.size() != audio.dim())
      throw ValidationError("word \"" + w.word + "\" prototype dim " +
                            std::to_string(w.features.size()) + " != audio dim " +
                            std::to_string(audio.dim()));

  Matrix proto(words.size(), audio.dim());
  for (std::size_t i = 0; i < words.size(); ++i)
    for (std::size_t k = 0; k < audio.dim(); ++k) proto(i, k) = words[i].features[k];
  const AlignmentPath path = dtw_align(proto, audio.features, euclidean);

  // Words matched to each frame, in order; a frame shared by several words
  // gets split into equal sub-intervals.
  std::vector<std::vector<std::size_t>> frame_words(audio.length());
  for (const auto& [wi, fj] : path.pairs) frame_words[fj].push_back(wi);

  std::vector<WordTiming> out(words.size());
  std::vector<bool> started(words.size(), false);
  for (std::size_t j = 0; j < audio.length(); ++j) {
    const auto [fs, fe] = audio.timestamps[j];
    const auto& ws = frame_words[j];
    const double slice = (fe - fs) / static_cast<double>(ws.size());
    for (std::size_t k = 0; k < ws.size(); ++k) {
      const std::size_t wi = ws[k];
      const double s = fs + slice * static_cast<double>(k);
      const double e = fs + slice * static_cast<double>(k + 1);
      if (!started[wi]) {
        out[wi].word = words[wi].word;
        out[wi].start_s = s;
        started[wi] = true;
      }
      out[wi].end_s = e;
    }
  }
  return out;
}

CollapseFn collapse_from_string(const std::string& s) {
  if (s == "mean") return CollapseFn::mean;
  if (s == "max") return CollapseFn::max;
  throw ValidationError("unknown collapse function \"" + s + "\" (expected mean|max)");
}

const char* collapse_name(CollapseFn f) {
  return f == CollapseFn::mean ? "mean" : "max";
}

FeatureSequence pivot_align(const FeatureSequence& pivot, const FeatureSequence& other,
                            CollapseFn collapse) {
  if (pivot.length() == 0)
    throw ValidationError("pivot_align: pivot sequence must be non-empty");
  const std::size_t n = pivot.length();
  const std::size_t dim = other.dim();
  FeatureSequence out;
  out.modality = other.modality;
  out.timestamps = pivot.timestamps;
  out.features = Matrix(n, dim);
  std::vector<std::size_t> count(n, 0);

  for (std::size_t r = 0; r < other.length(); ++r) {
    const double mid = 0.5 * (other.timestamps[r].first + other.timestamps[r].second);
    // Bin k owns midpoints in [start_k, end_k); rows outside every bin drop.
    std::size_t bin = n;
    for (std::size_t k = 0; k < n; ++k) {
      if (mid >= pivot.timestamps[k].first && mid < pivot.timestamps[k].second) {
        bin = k;
        break;
      }
    }
    if (bin == n) continue;
    if (collapse == CollapseFn::mean) {
      for (std::size_t c = 0; c < dim; ++c) out.features(bin, c) += other.features(r, c);
    } else {
      if (count[bin] == 0) {
        for (std::size_t c = 0; c < dim; ++c) out.features(bin, c) = other.features(r, c);
      } else {
        for (std::size_t c = 0; c < dim; ++c)
          out.features(bin, c) = std::max(out.features(bin, c), other.features(r, c));
      }
    }
    ++count[bin];
  }
  if (collapse == CollapseFn::mean) {
    for (std::size_t k = 0; k < n; ++k)
      if (count[k] > 0)
        for (std::size_t c = 0; c < dim; ++c)
          out.features(k, c) /= static_cast<double>(count[k]);
  }
  return out;
}

Corpus align_corpus(const Corpus& corpus, CollapseFn collapse) {
  Corpus out;
  out.dims = corpus.dims;
  out.segments.reserve(corpus.segments.size());
  for (const seq::Segment& s : corpus.segments) {
    if (s.text.length() == 0)
      throw ValidationError("segment " + s.id +
                            ": empty text sequence; pivot modality must be non-empty");
    seq::Segment a = s;
    a.audio = pivot_align(s.text, s.audio, collapse);
    a.video = pivot_align(s.text, s.video, collapse);
    out.segments.push_back(std::move(a));
  }
  return out;
}

}  // namespace msa::align
