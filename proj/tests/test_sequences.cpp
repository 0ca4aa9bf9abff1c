#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "core/rng.hpp"
#include "core/sequences.hpp"

using namespace msa::seq;
using msa::num::Matrix;
using msa::Rng;

namespace {

Segment make_segment(const std::string& id, int label, double duration,
                     std::size_t dim = 2) {
  Segment s;
  s.id = id;
  s.label = label;
  s.duration_s = duration;
  s.text.modality = Modality::text;
  s.audio.modality = Modality::audio;
  s.video.modality = Modality::video;
  for (Modality m : {Modality::text, Modality::audio, Modality::video}) {
    FeatureSequence& fs = s.modality(m);
    fs.timestamps = {{0.0, duration / 2.0}, {duration / 2.0, duration}};
    fs.features = Matrix(2, dim, 0.5);
  }
  return s;
}

double column_mean(const Matrix& m, std::size_t col) {
  double s = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i) s += m(i, col);
  return s / static_cast<double>(m.rows());
}

int sgn(double x) { return x > 0 ? 1 : (x < 0 ? -1 : 0); }

std::string error_text(const std::function<void()>& f) {
  try {
    f();
  } catch (const msa::Error& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("split names round-trip") {
  for (Split sp : {Split::train, Split::valid, Split::test})
    CHECK(split_from_string(split_name(sp)) == sp);
  CHECK_THROWS_AS(split_from_string("dev"), msa::ValidationError);
}

TEST_CASE("serialization round-trips bit-exactly across seeds") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    SynthConfig cfg;
    cfg.segments = 5;
    cfg.dims = {4, 3, 3};
    const Corpus c = synth_generate(cfg, seed);
    const std::string text = corpus_to_string(c);
    const Corpus back = parse_corpus(text, "mem");
    CHECK(corpus_to_string(back) == text);
    REQUIRE(back.segments.size() == c.segments.size());
    for (std::size_t i = 0; i < c.segments.size(); ++i) {
      CHECK(back.segments[i].id == c.segments[i].id);
      CHECK(back.segments[i].label == c.segments[i].label);
      CHECK(back.segments[i].split == c.segments[i].split);
      CHECK(back.segments[i].duration_s == c.segments[i].duration_s);
      CHECK(back.segments[i].text.features == c.segments[i].text.features);
      CHECK(back.segments[i].audio.features == c.segments[i].audio.features);
      CHECK(back.segments[i].video.features == c.segments[i].video.features);
      CHECK(back.segments[i].audio.timestamps == c.segments[i].audio.timestamps);
    }
  }
}

TEST_CASE("save/load round-trips through a file") {
  SynthConfig cfg;
  cfg.segments = 4;
  cfg.dims = {3, 3, 3};
  const Corpus c = synth_generate(cfg, 9);
  const auto path =
      (std::filesystem::temp_directory_path() / "msa_seq_roundtrip.json").string();
  save_corpus(c, path);
  const Corpus back = load_corpus(path);
  CHECK(corpus_to_string(back) == corpus_to_string(c));
  std::remove(path.c_str());

  CHECK_THROWS_AS(load_corpus("/nonexistent/dir/corpus.json"), msa::IoError);
}

TEST_CASE("validation rejects malformed segments and names the culprit") {
  Corpus c;
  c.dims = {2, 2, 2};

  SUBCASE("label out of range") {
    c.segments = {make_segment("bad_label", 2, 1.0)};
    const std::string msg = error_text([&] { c.validate(); });
    CHECK(msg.find("bad_label") != std::string::npos);
    CHECK(msg.find("label") != std::string::npos);
  }
  SUBCASE("non-positive duration") {
    c.segments = {make_segment("bad_dur", 0, 1.0)};
    c.segments[0].duration_s = 0.0;
    CHECK_THROWS_AS(c.validate(), msa::ValidationError);
  }
  SUBCASE("end before start") {
    c.segments = {make_segment("bad_interval", 0, 1.0)};
    c.segments[0].audio.timestamps[1] = {0.9, 0.6};
    const std::string msg = error_text([&] { c.validate(); });
    CHECK(msg.find("bad_interval") != std::string::npos);
    CHECK(msg.find("audio") != std::string::npos);
    CHECK(msg.find("end_s") != std::string::npos);
  }
  SUBCASE("overlapping intervals") {
    c.segments = {make_segment("bad_overlap", 0, 1.0)};
    c.segments[0].text.timestamps = {{0.0, 0.7}, {0.4, 1.0}};
    const std::string msg = error_text([&] { c.validate(); });
    CHECK(msg.find("bad_overlap") != std::string::npos);
    CHECK(msg.find("overlap") != std::string::npos);
  }
  SUBCASE("timestamps out of order") {
    c.segments = {make_segment("bad_order", 0, 1.0)};
    c.segments[0].video.timestamps = {{0.5, 1.0}, {0.0, 0.4}};
    CHECK_THROWS_AS(c.validate(), msa::ValidationError);
  }
  SUBCASE("interval outside segment") {
    c.segments = {make_segment("bad_range", 0, 1.0)};
    c.segments[0].text.timestamps[1] = {0.5, 1.5};
    const std::string msg = error_text([&] { c.validate(); });
    CHECK(msg.find("bad_range") != std::string::npos);
  }
  SUBCASE("row count mismatch") {
    c.segments = {make_segment("bad_rows", 0, 1.0)};
    c.segments[0].audio.features = Matrix(3, 2, 0.1);
    const std::string msg = error_text([&] { c.validate(); });
    CHECK(msg.find("bad_rows") != std::string::npos);
    CHECK(msg.find("timestamps") != std::string::npos);
  }
  SUBCASE("non-finite feature") {
    c.segments = {make_segment("bad_nan", 0, 1.0)};
    c.segments[0].text.features(0, 0) = std::nan("");
    const std::string msg = error_text([&] { c.validate(); });
    CHECK(msg.find("bad_nan") != std::string::npos);
    CHECK(msg.find("finite") != std::string::npos);
  }
  SUBCASE("duplicate ids") {
    c.segments = {make_segment("twin", 0, 1.0), make_segment("twin", 1, 2.0)};
    const std::string msg = error_text([&] { c.validate(); });
    CHECK(msg.find("duplicate") != std::string::npos);
    CHECK(msg.find("twin") != std::string::npos);
  }
  SUBCASE("dim mismatch against corpus header") {
    c.segments = {make_segment("bad_dim", 0, 1.0, 3)};
    const std::string msg = error_text([&] { c.validate(); });
    CHECK(msg.find("bad_dim") != std::string::npos);
    CHECK(msg.find("dim") != std::string::npos);
  }
}

TEST_CASE("parser rejects malformed documents") {
  CHECK_THROWS_AS(parse_corpus("{not json", "mem"), msa::ParseError);
  CHECK_THROWS_AS(parse_corpus("{}", "mem"), msa::ParseError);
  CHECK_THROWS_AS(parse_corpus(R"({"dims":{"text":2,"audio":2,"video":2},"segments":[{"id":"x"}]})",
                               "mem"),
                  msa::ParseError);
  // Feature row narrower than the corpus dim.
  const std::string bad_row = R"({
    "dims": {"text": 2, "audio": 1, "video": 1},
    "segments": [{
      "id": "s0", "label": 0, "duration_s": 1.0, "split": "train",
      "text": {"timestamps": [[0.0, 1.0]], "features": [[1.0]]},
      "audio": {"timestamps": [[0.0, 1.0]], "features": [[1.0]]},
      "video": {"timestamps": [[0.0, 1.0]], "features": [[1.0]]}
    }]
  })";
  const std::string msg = error_text([&] { parse_corpus(bad_row, "mem"); });
  CHECK(msg.find("s0") != std::string::npos);
  CHECK(msg.find("expected 2") != std::string::npos);
}

TEST_CASE("corpus stats") {
  SUBCASE("empty corpus has null average duration") {
    const CorpusStats st = corpus_stats(Corpus{});
    CHECK(st.total == 0);
    CHECK(!st.avg_duration_s.has_value());
    CHECK(stats_to_json(st).find("\"avg_duration_s\":null") != std::string::npos);
  }
  SUBCASE("label counts, mean duration, and dims") {
    Corpus c;
    c.dims = {768, 74, 35};
    std::size_t n = 0;
    auto add = [&](int label, std::size_t count) {
      for (std::size_t i = 0; i < count; ++i) {
        Segment s;
        s.id = "u" + std::to_string(n++);
        s.label = label;
        s.duration_s = 17.46;
        c.segments.push_back(std::move(s));
      }
    };
    add(1, 130);
    add(-1, 129);
    add(0, 59);
    c.validate();
    const CorpusStats st = corpus_stats(c);
    CHECK(st.total == 318);
    CHECK(st.positive == 130);
    CHECK(st.negative == 129);
    CHECK(st.neutral == 59);
    REQUIRE(st.avg_duration_s.has_value());
    CHECK(*st.avg_duration_s == doctest::Approx(17.46).epsilon(1e-12));
    CHECK(st.dims[0] == 768);
    const std::string j = stats_to_json(st);
    CHECK(j.find("\"total\":318") != std::string::npos);
    CHECK(j.find("\"positive\":130") != std::string::npos);
    CHECK(j.find("\"text\":768") != std::string::npos);
  }
}

TEST_CASE("annotation aggregation") {
  CHECK(aggregate_annotations({1, 1, 1, 1, 1}) == std::pair{1, 1.0});
  CHECK(aggregate_annotations({-1, -1, -1, 0, 1}) == std::pair{-1, 0.6});
  CHECK(aggregate_annotations({0, 0, 1, 1, 0}) == std::pair{0, 0.6});
  CHECK(aggregate_annotations({1, 1, 0, 0, -1}) == std::pair{0, 0.4});     // 2-2 tie
  CHECK(aggregate_annotations({1, 1, -1, -1, 0}) == std::pair{0, 0.2});    // polar tie
  CHECK(aggregate_annotations({1, 1, 1, -1, -1}) == std::pair{1, 0.6});
  CHECK_THROWS_AS(aggregate_annotations({1, 1, 1}), msa::ValidationError);
  CHECK_THROWS_AS(aggregate_annotations({1, 1, 1, 1, 2}), msa::ValidationError);
}

TEST_CASE("annotation aggregation is permutation-invariant") {
  Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int> labels(5);
    for (int& l : labels) l = rng.uniform_int(-1, 1);
    const auto base = aggregate_annotations(labels);
    std::vector<int> shuffled = labels;
    rng.shuffle(shuffled);
    CHECK(aggregate_annotations(shuffled) == base);
  }
}

TEST_CASE("synth generation is deterministic per seed") {
  SynthConfig cfg;
  cfg.segments = 6;
  cfg.dims = {4, 3, 3};
  CHECK(corpus_to_string(synth_generate(cfg, 5)) == corpus_to_string(synth_generate(cfg, 5)));
  CHECK(corpus_to_string(synth_generate(cfg, 5)) != corpus_to_string(synth_generate(cfg, 6)));
}

TEST_CASE("synth corpora have the advertised shape") {
  SynthConfig cfg;
  cfg.segments = 40;
  const Corpus c = synth_generate(cfg, 3);
  c.validate();
  CHECK(c.segments.size() == 40);
  CHECK(!c.is_aligned());  // raw densities differ by design
  std::size_t splits[3] = {0, 0, 0};
  for (const Segment& s : c.segments) {
    const std::size_t w = s.text.length();
    CHECK(w >= cfg.words_min);
    CHECK(w <= cfg.words_max);
    CHECK(s.audio.length() == 10 * w);
    CHECK(s.video.length() == 5 * w);
    CHECK(s.duration_s == doctest::Approx(0.5 * static_cast<double>(w)));
    ++splits[static_cast<int>(s.split)];
  }
  CHECK(splits[0] == 28);  // 70 percent of 40
  CHECK(splits[1] == 6);
  CHECK(splits[2] == 6);
}

TEST_CASE("crossmodal signal lives in the product, not in either modality") {
  SynthConfig cfg;
  cfg.mode = SynthMode::crossmodal;
  cfg.segments = 300;
  const Corpus c = synth_generate(cfg, 12);

  std::size_t text_hits = 0, audio_hits = 0;
  for (const Segment& s : c.segments) {
    CHECK((s.label == -1 || s.label == 1));
    const int st = sgn(column_mean(s.text.features, 0));
    const int sa = sgn(column_mean(s.audio.features, 0));
    // Noise 0.1 over >= 6 frames cannot flip a unit-mean sign.
    CHECK(st * sa == s.label);
    if (st == s.label) ++text_hits;
    if (sa == s.label) ++audio_hits;
  }
  // The best single-modality decision stump stays at chance level.
  const double n = static_cast<double>(c.segments.size());
  CHECK(text_hits / n > 0.38);
  CHECK(text_hits / n < 0.62);
  CHECK(audio_hits / n > 0.38);
  CHECK(audio_hits / n < 0.62);
}

TEST_CASE("unimodal signal sits on the planted modality") {
  SynthConfig cfg;
  cfg.mode = SynthMode::unimodal;
  cfg.planted = Modality::audio;
  cfg.segments = 200;
  cfg.noise = 0.0;
  cfg.amplitude = 1.0;
  const Corpus c = synth_generate(cfg, 21);

  std::size_t counts[3] = {0, 0, 0};
  for (const Segment& s : c.segments) {
    CHECK(column_mean(s.audio.features, 0) == doctest::Approx(s.label).epsilon(1e-12));
    CHECK(column_mean(s.text.features, 0) == 0.0);
    CHECK(column_mean(s.video.features, 0) == 0.0);
    ++counts[s.label + 1];
  }
  // Neutral drawn at half the polar rate: expect roughly 80/40/80.
  CHECK(counts[0] > 55);
  CHECK(counts[2] > 55);
  CHECK(counts[1] > 20);
  CHECK(counts[1] < 60);
}

TEST_CASE("synth config validation") {
  SynthConfig cfg;
  cfg.segments = 0;
  CHECK_THROWS_AS(synth_generate(cfg, 1), msa::ValidationError);
  cfg = SynthConfig{};
  cfg.dims = {2, 12, 10};  // too narrow for the planted channels
  CHECK_THROWS_AS(synth_generate(cfg, 1), msa::ValidationError);
  cfg = SynthConfig{};
  cfg.words_max = 3;  // below words_min
  CHECK_THROWS_AS(synth_generate(cfg, 1), msa::ValidationError);
  cfg = SynthConfig{};
  cfg.train_frac = 0.9;
  cfg.valid_frac = 0.2;
  CHECK_THROWS_AS(synth_generate(cfg, 1), msa::ValidationError);
}
