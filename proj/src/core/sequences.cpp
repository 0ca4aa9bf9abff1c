#include "core/sequences.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "core/errors.hpp"
#include "core/rng.hpp"

namespace msa::seq {

using nlohmann::json;

const char* modality_name(Modality m) {
  switch (m) {
    case Modality::text: return "text";
    case Modality::audio: return "audio";
    case Modality::video: return "video";
  }
  return "?";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "valid") return Split::valid;
  if (s == "test") return Split::test;
  throw ValidationError("unknown split \"" + s + "\" (expected train|valid|test)");
}

const char* split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::valid: return "valid";
    case Split::test: return "test";
  }
  return "?";
}

void FeatureSequence::validate(const std::string& segment_id, double duration_s) const {
  const std::string who = "segment " + segment_id + " " + modality_name(modality);
  if (features.rows() != timestamps.size())
    throw ValidationError(who + ": features.rows " + std::to_string(features.rows()) +
                          " != timestamps length " + std::to_string(timestamps.size()));
  constexpr double kEps = 1e-9;
  for (std::size_t i = 0; i < timestamps.size(); ++i) {
    const auto [s, e] = timestamps[i];
    if (!(e > s))
      throw ValidationError(who + ": interval " + std::to_string(i) + " has end_s <= start_s");
    if (s < -kEps || e > duration_s + kEps)
      throw ValidationError(who + ": interval " + std::to_string(i) +
                            " outside [0, duration_s]");
    if (i > 0) {
      if (!(s > timestamps[i - 1].first))
        throw ValidationError(who + ": timestamps not strictly increasing at " +
                              std::to_string(i));
      if (s < timestamps[i - 1].second - kEps)
        throw ValidationError(who + ": intervals overlap at " + std::to_string(i));
    }
  }
  if (!features.all_finite())
    throw ValidationError(who + ": non-finite feature value");
}

const FeatureSequence& Segment::modality(Modality m) const {
  switch (m) {
    case Modality::text: return text;
    case Modality::audio: return audio;
    case Modality::video: return video;
  }
  return text;
}

FeatureSequence& Segment::modality(Modality m) {
  switch (m) {
    case Modality::text: return text;
    case Modality::audio: return audio;
    case Modality::video: return video;
  }
  return text;
}

void Segment::validate() const {
  if (label != -1 && label != 0 && label != 1)
    throw ValidationError("segment " + id + ": label " + std::to_string(label) +
                          " outside {-1,0,1}");
  if (!(duration_s > 0.0))
    throw ValidationError("segment " + id + ": duration_s must be positive");
  text.validate(id, duration_s);
  audio.validate(id, duration_s);
  video.validate(id, duration_s);
}

void Corpus::validate() const {
  std::map<std::string, int> seen;
  for (const Segment& s : segments) {
    s.validate();
    if (++seen[s.id] > 1)
      throw ValidationError("duplicate segment id " + s.id);
    for (Modality m : {Modality::text, Modality::audio, Modality::video}) {
      if (s.modality(m).dim() != dim(m) && s.modality(m).features.rows() > 0)
        throw ValidationError("segment " + s.id + " " + modality_name(m) + ": dim " +
                              std::to_string(s.modality(m).dim()) +
                              " != corpus dim " + std::to_string(dim(m)));
    }
  }
}

bool Corpus::is_aligned() const {
  for (const Segment& s : segments)
    if (s.text.length() != s.audio.length() || s.text.length() != s.video.length())
      return false;
  return true;
}

namespace {

json sequence_to_json(const FeatureSequence& fs) {
  json ts = json::array();
  for (const auto& [s, e] : fs.timestamps) ts.push_back(json::array({s, e}));
  json rows = json::array();
  for (std::size_t i = 0; i < fs.features.rows(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < fs.features.cols(); ++j) row.push_back(fs.features(i, j));
    rows.push_back(std::move(row));
  }
  return json{{"timestamps", std::move(ts)}, {"features", std::move(rows)}};
}

FeatureSequence sequence_from_json(const json& j, Modality m, std::size_t dim,
                                   const std::string& seg_id) {
  FeatureSequence fs;
  fs.modality = m;
  const std::string who = "segment " + seg_id + " " + modality_name(m);
  if (!j.contains("timestamps") || !j.contains("features"))
    throw ParseError(who + ": missing timestamps or features");
  for (const auto& pair : j.at("timestamps")) {
    if (!pair.is_array() || pair.size() != 2)
      throw ParseError(who + ": timestamp entries must be [start_s, end_s]");
    fs.timestamps.emplace_back(pair[0].get<double>(), pair[1].get<double>());
  }
  const auto& rows = j.at("features");
  fs.features = Matrix(rows.size(), dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != dim)
      throw ParseError(who + ": feature row " + std::to_string(i) + " has " +
                       std::to_string(rows[i].size()) + " values, expected " +
                       std::to_string(dim));
    for (std::size_t k = 0; k < dim; ++k) fs.features(i, k) = rows[i][k].get<double>();
  }
  return fs;
}

}  // namespace

std::string corpus_to_string(const Corpus& corpus) {
  json doc;
  doc["dims"] = {{"text", corpus.dims[0]}, {"audio", corpus.dims[1]}, {"video", corpus.dims[2]}};
  json segs = json::array();
  for (const Segment& s : corpus.segments) {
    json seg;
    seg["id"] = s.id;
    seg["label"] = s.label;
    seg["duration_s"] = s.duration_s;
    seg["split"] = split_name(s.split);
    seg["text"] = sequence_to_json(s.text);
    seg["audio"] = sequence_to_json(s.audio);
    seg["video"] = sequence_to_json(s.video);
    segs.push_back(std::move(seg));
  }
  doc["segments"] = std::move(segs);
  return doc.dump(1) + "\n";
}

void save_corpus(const Corpus& corpus, const std::string& path) {
  corpus.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << corpus_to_string(corpus);
  if (!out) throw IoError("write failed for " + path);
}

Corpus parse_corpus(const std::string& text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(origin + ": " + e.what());
  }
  Corpus c;
  try {
    const auto& dims = doc.at("dims");
    c.dims = {dims.at("text").get<std::size_t>(), dims.at("audio").get<std::size_t>(),
              dims.at("video").get<std::size_t>()};
    for (const auto& js : doc.at("segments")) {
      Segment s;
      s.id = js.at("id").get<std::string>();
      s.label = js.at("label").get<int>();
      s.duration_s = js.at("duration_s").get<double>();
      s.split = split_from_string(js.at("split").get<std::string>());
      s.text = sequence_from_json(js.at("text"), Modality::text, c.dims[0], s.id);
      s.audio = sequence_from_json(js.at("audio"), Modality::audio, c.dims[1], s.id);
      s.video = sequence_from_json(js.at("video"), Modality::video, c.dims[2], s.id);
      c.segments.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw ParseError(origin + ": " + e.what());
  }
  c.validate();
  return c;
}

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_corpus(buf.str(), path);
}

CorpusStats corpus_stats(const Corpus& corpus) {
  CorpusStats st;
  st.total = corpus.segments.size();
  st.dims = corpus.dims;
  double dur = 0.0;
  for (const Segment& s : corpus.segments) {
    if (s.label > 0)
      ++st.positive;
    else if (s.label < 0)
      ++st.negative;
    else
      ++st.neutral;
    dur += s.duration_s;
  }
  if (st.total > 0) st.avg_duration_s = dur / static_cast<double>(st.total);
  return st;
}

std::string stats_to_json(const CorpusStats& s) {
  json j;
  j["total"] = s.total;
  j["positive"] = s.positive;
  j["negative"] = s.negative;
  j["neutral"] = s.neutral;
  if (s.avg_duration_s)
    j["avg_duration_s"] = *s.avg_duration_s;
  else
    j["avg_duration_s"] = nullptr;
  j["dims"] = {{"text", s.dims[0]}, {"audio", s.dims[1]}, {"video", s.dims[2]}};
  return j.dump();
}

std::pair<int, double> aggregate_annotations(const std::vector<int>& labels) {
  if (labels.size() != 5)
    throw ValidationError("annotation set must contain exactly 5 labels, got " +
                          std::to_string(labels.size()));
  int counts[3] = {0, 0, 0};  // -1, 0, +1
  for (int l : labels) {
    if (l < -1 || l > 1)
      throw ValidationError("annotation label " + std::to_string(l) + " outside {-1,0,1}");
    ++counts[l + 1];
  }
  int best = 0;
  for (int k = 1; k < 3; ++k)
    if (counts[k] > counts[best]) best = k;
  int n_best = 0;
  for (int c : counts)
    if (c == counts[best]) ++n_best;
  const int label = n_best > 1 ? 0 : best - 1;  // tie -> neutral
  return {label, counts[label + 1] / 5.0};
}

void SynthConfig::validate() const {
  if (segments < 1) throw ValidationError("synth config: segment count must be >= 1");
  for (std::size_t d : dims)
    if (d == 0) throw ValidationError("synth config: all modality dims must be positive");
  if (mode == SynthMode::crossmodal && (dims[0] < 3 || dims[1] < 3))
    throw ValidationError(
        "synth config: crossmodal mode needs text and audio dims >= 3 for the planted channels");
  if (words_min < 1 || words_max < words_min)
    throw ValidationError("synth config: invalid words_min/words_max");
  if (!(word_duration_s > 0.0)) throw ValidationError("synth config: word duration must be > 0");
  if (noise < 0.0) throw ValidationError("synth config: noise must be >= 0");
  if (!(amplitude > 0.0)) throw ValidationError("synth config: amplitude must be > 0");
  if (train_frac <= 0.0 || valid_frac < 0.0 || train_frac + valid_frac >= 1.0)
    throw ValidationError("synth config: split fractions must satisfy 0 < train, train+valid < 1");
}

namespace {

// Frame grid for one modality: per_word frames per word interval.
void fill_timestamps(FeatureSequence& fs, std::size_t n_words, std::size_t per_word,
                     double word_dur) {
  const std::size_t n = n_words * per_word;
  const double fd = word_dur / static_cast<double>(per_word);
  fs.timestamps.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    fs.timestamps.emplace_back(static_cast<double>(i) * fd, static_cast<double>(i + 1) * fd);
}

}  // namespace

Corpus synth_generate(const SynthConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  Corpus c;
  c.dims = config.dims;

  for (std::size_t si = 0; si < config.segments; ++si) {
    Segment s;
    s.id = "s" + std::to_string(si);
    const std::size_t n_words =
        static_cast<std::size_t>(rng.uniform_int(static_cast<int>(config.words_min),
                                                 static_cast<int>(config.words_max)));
    s.duration_s = static_cast<double>(n_words) * config.word_duration_s;

    int label = 0;
    int sign_text = 0, sign_audio = 0;
    if (config.mode == SynthMode::crossmodal) {
      sign_text = rng.sign();
      sign_audio = rng.sign();
      label = sign_text * sign_audio;
    } else {
      // Neutral at roughly half the rate of each polar class.
      const std::uint64_t r = rng.below(5);
      label = r < 2 ? 1 : (r < 4 ? -1 : 0);
    }
    s.label = label;

    // Per-word latent signs; audio frames inside one word share the word's
    // sign so the signal survives mean collapse during pivot alignment.
    std::vector<int> zeta_text(n_words), zeta_audio(n_words);
    for (std::size_t k = 0; k < n_words; ++k) zeta_text[k] = rng.sign();
    for (std::size_t k = 0; k < n_words; ++k) zeta_audio[k] = rng.sign();

    const std::size_t audio_per_word = 10, video_per_word = 5;
    s.text.modality = Modality::text;
    s.audio.modality = Modality::audio;
    s.video.modality = Modality::video;
    fill_timestamps(s.text, n_words, 1, config.word_duration_s);
    fill_timestamps(s.audio, n_words, audio_per_word, config.word_duration_s);
    fill_timestamps(s.video, n_words, video_per_word, config.word_duration_s);
    s.text.features = Matrix(n_words, c.dims[0]);
    s.audio.features = Matrix(n_words * audio_per_word, c.dims[1]);
    s.video.features = Matrix(n_words * video_per_word, c.dims[2]);

    auto fill_noise = [&](Matrix& m) {
      for (std::size_t k = 0; k < m.size(); ++k) m[k] = config.noise * rng.normal();
    };
    fill_noise(s.text.features);
    fill_noise(s.audio.features);
    fill_noise(s.video.features);

    const double amp = config.amplitude;
    if (config.mode == SynthMode::crossmodal) {
      for (std::size_t k = 0; k < n_words; ++k) {
        s.text.features(k, 0) += amp * sign_text;
        s.text.features(k, 1) += amp * zeta_text[k];
        s.text.features(k, 2) += amp * sign_text * zeta_text[k];
      }
      for (std::size_t f = 0; f < n_words * audio_per_word; ++f) {
        const std::size_t k = f / audio_per_word;
        s.audio.features(f, 0) += amp * sign_audio;
        s.audio.features(f, 1) += amp * zeta_audio[k];
        s.audio.features(f, 2) += amp * sign_audio * zeta_audio[k];
      }
    } else {
      FeatureSequence& planted = s.modality(config.planted);
      for (std::size_t i = 0; i < planted.features.rows(); ++i)
        planted.features(i, 0) += amp * label;
    }

    c.segments.push_back(std::move(s));
  }

  // Seeded 70/15/15-style shuffle split.
  std::vector<std::size_t> order(c.segments.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  const std::size_t n = order.size();
  const auto n_train = static_cast<std::size_t>(std::round(config.train_frac * n));
  const auto n_valid = static_cast<std::size_t>(std::round(config.valid_frac * n));
  for (std::size_t pos = 0; pos < n; ++pos) {
    Split sp = pos < n_train ? Split::train : (pos < n_train + n_valid ? Split::valid : Split::test);
    c.segments[order[pos]].split = sp;
  }

  c.validate();
  return c;
}

}  // namespace msa::seq
