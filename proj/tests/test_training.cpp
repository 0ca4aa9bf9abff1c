#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "core/alignment.hpp"
#include "core/checkpoint.hpp"
#include "core/rng.hpp"
#include "core/training.hpp"

using namespace msa::train;
using msa::Rng;
using msa::fusion::init_model;
using msa::fusion::load_model;
using msa::fusion::Model;
using msa::fusion::model_from_string;
using msa::fusion::model_to_string;
using msa::fusion::save_model;
using msa::fusion::ModelConfig;
using msa::fusion::ModelKind;
using msa::num::Matrix;
using msa::seq::Corpus;
using msa::seq::Modality;

namespace {

// Independent confusion-matrix metric implementations.
struct OracleMetrics {
  double acc, f1, mae;
};

OracleMetrics oracle_metrics(const std::vector<int>& yt, const std::vector<int>& yp) {
  const double n = static_cast<double>(yt.size());
  double hits = 0.0, abs_err = 0.0;
  for (std::size_t i = 0; i < yt.size(); ++i) {
    if (yt[i] == yp[i]) hits += 1.0;
    abs_err += std::abs(static_cast<double>(yt[i] - yp[i]));
  }
  double f1_sum = 0.0;
  int present = 0;
  for (int cls : {-1, 0, 1}) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < yt.size(); ++i) {
      if (yt[i] == cls && yp[i] == cls) ++tp;
      if (yt[i] != cls && yp[i] == cls) ++fp;
      if (yt[i] == cls && yp[i] != cls) ++fn;
    }
    if (tp + fn == 0) continue;
    ++present;
    if (tp > 0) f1_sum += 2.0 * tp / (2.0 * tp + fp + fn);
  }
  return {hits / n, present ? f1_sum / present : 0.0, abs_err / n};
}

ModelConfig small_text_mult(const std::array<std::size_t, 3>& dims) {
  ModelConfig cfg;
  cfg.kind = ModelKind::mult;
  cfg.mask = {Modality::text};
  cfg.dims = dims;
  cfg.d_k = 4;
  return cfg;
}

Corpus separable_corpus(std::uint64_t seed, std::size_t segments = 60) {
  msa::seq::SynthConfig sc;
  sc.mode = msa::seq::SynthMode::unimodal;
  sc.planted = Modality::text;
  sc.segments = segments;
  sc.dims = {4, 3, 3};
  sc.noise = 0.02;
  sc.words_min = 3;
  sc.words_max = 5;
  return msa::align::align_corpus(synth_generate(sc, seed), msa::align::CollapseFn::mean);
}

}  // namespace

TEST_CASE("class index mapping") {
  CHECK(class_index(-1) == 0);
  CHECK(class_index(0) == 1);
  CHECK(class_index(1) == 2);
  for (int l : {-1, 0, 1}) CHECK(index_class(class_index(l)) == l);
  CHECK_THROWS_AS(class_index(2), msa::ValidationError);
  CHECK_THROWS_AS(index_class(3), msa::ValidationError);
}

TEST_CASE("cross-entropy loss") {
  SUBCASE("uniform logits cost ln 3") {
    const auto [loss, grad] = cross_entropy_loss(Matrix(1, 3), 0);
    CHECK(loss == doctest::Approx(std::log(3.0)).epsilon(1e-12));
    CHECK(grad(0, 0) == doctest::Approx(1.0 / 3.0));
    CHECK(grad(0, 1) == doctest::Approx(1.0 / 3.0 - 1.0));
    CHECK(grad(0, 2) == doctest::Approx(1.0 / 3.0));
  }
  SUBCASE("confident correct logit costs almost nothing") {
    const auto [loss, grad] = cross_entropy_loss(Matrix::from_rows({{30.0, 0.0, 0.0}}), -1);
    CHECK(loss < 1e-12);
    CHECK(std::abs(grad(0, 0)) < 1e-12);
  }
  SUBCASE("log-sum-exp oracle and zero-sum gradient") {
    Rng rng(1);
    for (int trial = 0; trial < 100; ++trial) {
      Matrix logits(1, 3);
      for (std::size_t k = 0; k < 3; ++k) logits[k] = rng.uniform(-5.0, 5.0);
      const int label = rng.uniform_int(-1, 1);
      const auto [loss, grad] = cross_entropy_loss(logits, label);

      const double m = std::max({logits[0], logits[1], logits[2]});
      const double lse =
          m + std::log(std::exp(logits[0] - m) + std::exp(logits[1] - m) +
                       std::exp(logits[2] - m));
      CHECK(loss == doctest::Approx(lse - logits[class_index(label)]).epsilon(1e-12));
      CHECK(grad(0, 0) + grad(0, 1) + grad(0, 2) == doctest::Approx(0.0));
    }
  }
  SUBCASE("input validation") {
    CHECK_THROWS_AS(cross_entropy_loss(Matrix(1, 2), 0), msa::DimensionError);
    Matrix bad(1, 3);
    bad[0] = std::nan("");
    CHECK_THROWS_AS(cross_entropy_loss(bad, 0), msa::NumericError);
  }
}

TEST_CASE("metrics on hand-worked vectors") {
  CHECK(accuracy({1, 0, -1}, {1, 0, -1}) == 1.0);
  CHECK(accuracy({1, 0, -1}, {0, 0, 0}) == doctest::Approx(1.0 / 3.0));
  CHECK(mae({-1, 1}, {1, -1}) == 2.0);
  CHECK(mae({1, 0, -1, 0}, {1, 1, -1, -1}) == 0.5);

  // +1: P=R=2/3; -1: P=R=1/2; macro = 7/12.
  CHECK(f1({1, 1, 1, -1, -1}, {1, 1, -1, -1, 1}) == doctest::Approx(7.0 / 12.0));
  // Constant neutral prediction on a balanced set: (0 + 1/2 + 0) / 3.
  CHECK(f1({-1, -1, 0, 0, 1, 1}, {0, 0, 0, 0, 0, 0}) == doctest::Approx(1.0 / 6.0));
  CHECK(f1({1, 1, 1}, {1, 1, 1}) == 1.0);
  // Absent classes are excluded; false alarms on them do not change macro-F1.
  CHECK(f1({1, 1}, {-1, 1}) == doctest::Approx(2.0 / 3.0));

  CHECK_THROWS_AS(accuracy({}, {}), msa::ValidationError);
  CHECK_THROWS_AS(mae({1}, {1, 0}), msa::ValidationError);
}

TEST_CASE("metrics match the independent oracle on random vectors") {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(1, 30));
    std::vector<int> yt(n), yp(n);
    for (std::size_t i = 0; i < n; ++i) {
      yt[i] = rng.uniform_int(-1, 1);
      yp[i] = rng.uniform_int(-1, 1);
    }
    const OracleMetrics o = oracle_metrics(yt, yp);
    CHECK(accuracy(yt, yp) == doctest::Approx(o.acc).epsilon(1e-12));
    CHECK(f1(yt, yp) == doctest::Approx(o.f1).epsilon(1e-12));
    CHECK(mae(yt, yp) == doctest::Approx(o.mae).epsilon(1e-12));
  }
}

TEST_CASE("sgd_step") {
  Model model = init_model(small_text_mult({2, 1, 1}), 1);
  const Matrix before = model.param("head.b");
  Matrix g(1, 3);
  g(0, 0) = 1.0;
  g(0, 2) = -2.0;
  sgd_step(model, {{"head.b", g}}, 0.1);
  CHECK(model.param("head.b")(0, 0) == doctest::Approx(before(0, 0) - 0.1));
  CHECK(model.param("head.b")(0, 1) == before(0, 1));
  CHECK(model.param("head.b")(0, 2) == doctest::Approx(before(0, 2) + 0.2));

  CHECK_THROWS_AS(sgd_step(model, {{"head.b", Matrix(2, 3)}}, 0.1), msa::DimensionError);
  CHECK_THROWS_AS(sgd_step(model, {{"ghost", Matrix(1, 1)}}, 0.1), msa::StateError);
}

TEST_CASE("train config validation") {
  TrainConfig cfg;
  cfg.epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), msa::ValidationError);
  cfg = TrainConfig{};
  cfg.batch = 0;
  CHECK_THROWS_AS(cfg.validate(), msa::ValidationError);
  cfg = TrainConfig{};
  cfg.lr = 0.0;
  CHECK_THROWS_AS(cfg.validate(), msa::ValidationError);
}

TEST_CASE("train rejects unusable corpora") {
  msa::seq::SynthConfig sc;
  sc.segments = 4;
  sc.dims = {4, 3, 3};
  const Corpus raw = synth_generate(sc, 1);
  TrainConfig cfg;
  cfg.model = small_text_mult({4, 3, 3});
  CHECK_THROWS_AS(train(raw, cfg), msa::ValidationError);  // unaligned

  Corpus aligned = msa::align::align_corpus(raw, msa::align::CollapseFn::mean);
  for (auto& s : aligned.segments) s.split = msa::seq::Split::test;
  CHECK_THROWS_AS(train(aligned, cfg), msa::ValidationError);  // empty train split
}

TEST_CASE("training is deterministic in the seed") {
  const Corpus corpus = separable_corpus(3, 20);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.model = small_text_mult({4, 3, 3});

  const TrainResult a = train(corpus, cfg);
  const TrainResult b = train(corpus, cfg);
  CHECK(model_to_string(a.model) == model_to_string(b.model));
  CHECK(a.loss_history == b.loss_history);

  cfg.seed = 2;
  const TrainResult c = train(corpus, cfg);
  CHECK(model_to_string(a.model) != model_to_string(c.model));
}

TEST_CASE("training fits a separable unimodal corpus") {
  const Corpus corpus = separable_corpus(7);
  TrainConfig cfg;
  cfg.epochs = 60;
  cfg.lr = 0.2;
  cfg.model = small_text_mult({4, 3, 3});

  const TrainResult r = train(corpus, cfg);
  REQUIRE(r.loss_history.size() == 60);
  CHECK(r.loss_history.back() < 0.5 * r.loss_history.front());

  const MetricsReport train_m = evaluate(r.model, corpus, msa::seq::Split::train);
  CHECK(train_m.accuracy >= 0.95);
  const MetricsReport test_m = evaluate(r.model, corpus, msa::seq::Split::test);
  CHECK(test_m.accuracy >= 0.75);
  CHECK(test_m.mae <= 0.5);
}

TEST_CASE("lf_lstm training also learns the separable corpus") {
  const Corpus corpus = separable_corpus(11);
  TrainConfig cfg;
  cfg.epochs = 60;
  cfg.lr = 0.2;
  cfg.model.kind = ModelKind::lf_lstm;
  cfg.model.mask = {Modality::text};
  cfg.model.dims = {4, 3, 3};
  cfg.model.hidden = 6;
  cfg.model.head_hidden = 8;

  const TrainResult r = train(corpus, cfg);
  const MetricsReport m = evaluate(r.model, corpus, msa::seq::Split::train);
  CHECK(m.accuracy >= 0.9);
}

TEST_CASE("predict breaks logit ties toward the lowest class") {
  Model model = init_model(small_text_mult({2, 1, 1}), 1);
  for (auto& [name, m] : model.params)
    for (std::size_t k = 0; k < m.size(); ++k) m[k] = 0.0;

  msa::seq::Segment s;
  s.id = "tie";
  s.text.features = Matrix(2, 2, 0.3);
  CHECK(predict(model, s) == -1);  // all logits equal

  model.param("head.b")(0, 1) = 5.0;
  CHECK(predict(model, s) == 0);
}

TEST_CASE("evaluate a constant model against the label distribution") {
  const Corpus corpus = separable_corpus(13, 40);
  Model model = init_model(small_text_mult({4, 3, 3}), 1);
  for (auto& [name, m] : model.params)
    for (std::size_t k = 0; k < m.size(); ++k) m[k] = 0.0;
  model.param("head.b")(0, 1) = 1.0;  // always predicts neutral

  const MetricsReport m = evaluate(model, corpus, msa::seq::Split::train, "stub");
  CHECK(m.model_label == "stub");
  std::size_t neutral = 0, total = 0, polar = 0;
  for (const auto& s : corpus.segments) {
    if (s.split != msa::seq::Split::train) continue;
    ++total;
    if (s.label == 0) ++neutral;
    if (s.label != 0) ++polar;
  }
  CHECK(m.n == total);
  CHECK(m.accuracy == doctest::Approx(static_cast<double>(neutral) / total));
  CHECK(m.mae == doctest::Approx(static_cast<double>(polar) / total));

  CHECK_THROWS_AS(evaluate(model, Corpus{}, msa::seq::Split::test), msa::ValidationError);
}

TEST_CASE("default labels") {
  ModelConfig cfg;
  CHECK(default_label(cfg) == "TVA-Mult");
  cfg.kind = ModelKind::lf_lstm;
  cfg.mask = {Modality::text};
  CHECK(default_label(cfg) == "T-LFLSTM");
  cfg.kind = ModelKind::mult;
  cfg.mask = {Modality::text, Modality::audio};
  CHECK(default_label(cfg) == "TA-Mult");
}

TEST_CASE("metrics json round-trip and validation") {
  MetricsReport r;
  r.model_label = "TVA-Mult";
  r.accuracy = 0.875;
  r.f1 = 0.8;
  r.mae = 0.25;
  r.n = 48;
  r.kind = "mult";
  r.modalities = "tav";
  const MetricsReport back = metrics_from_json(metrics_to_json(r), "mem");
  CHECK(back.model_label == r.model_label);
  CHECK(back.accuracy == r.accuracy);
  CHECK(back.f1 == r.f1);
  CHECK(back.mae == r.mae);
  CHECK(back.n == r.n);
  CHECK(back.kind == r.kind);
  CHECK(back.modalities == r.modalities);

  CHECK_THROWS_AS(metrics_from_json("{", "mem"), msa::ParseError);
  CHECK_THROWS_AS(metrics_from_json("{}", "mem"), msa::ParseError);
  CHECK_THROWS_AS(
      metrics_from_json(R"({"model":"x","accuracy":1.5,"f1":0.5,"mae":0.1,"n":3})", "mem"),
      msa::ValidationError);
}

TEST_CASE("report rendering") {
  auto make = [](const std::string& label, const std::string& kind,
                 const std::string& mods, double acc) {
    MetricsReport r;
    r.model_label = label;
    r.accuracy = acc;
    r.f1 = acc - 0.05;
    r.mae = 0.3;
    r.n = 45;
    r.kind = kind;
    r.modalities = mods;
    return r;
  };

  SUBCASE("table and advantage footer") {
    const std::string out = render_report({make("TVA-Mult", "mult", "tav", 0.8),
                                           make("T-Mult", "mult", "t", 0.6),
                                           make("A-Mult", "mult", "a", 0.5)});
    CHECK(out.find("Model") != std::string::npos);
    CHECK(out.find("TVA-Mult") != std::string::npos);
    CHECK(out.find("0.8000") != std::string::npos);
    CHECK(out.find("+20.0 points") != std::string::npos);
    CHECK(out.find("+33.3% relative") != std::string::npos);
    CHECK(out.find("T-Mult") != std::string::npos);  // the best unimodal is named
  }
  SUBCASE("no footer without both a trimodal and a unimodal entry") {
    const std::string out =
        render_report({make("TVA-Mult", "mult", "tav", 0.8), make("TA-Mult", "mult", "ta", 0.7)});
    CHECK(out.find("points") == std::string::npos);
  }
  SUBCASE("per-kind footers stay separate") {
    const std::string out = render_report({make("TVA-Mult", "mult", "tav", 0.9),
                                           make("T-Mult", "mult", "t", 0.8),
                                           make("TVA-LFLSTM", "lf_lstm", "tav", 0.7),
                                           make("V-LFLSTM", "lf_lstm", "v", 0.6)});
    CHECK(out.find("TVA-Mult: TVA accuracy vs best unimodal (T-Mult)") != std::string::npos);
    CHECK(out.find("TVA-LFLSTM: TVA accuracy vs best unimodal (V-LFLSTM)") != std::string::npos);
  }
  SUBCASE("duplicate labels are rejected") {
    CHECK_THROWS_AS(
        render_report({make("TVA-Mult", "mult", "tav", 0.8), make("TVA-Mult", "mult", "tav", 0.7)}),
        msa::ValidationError);
    CHECK_THROWS_AS(render_report({}), msa::ValidationError);
  }
}

TEST_CASE("checkpoint round-trip is bit-exact") {
  for (const ModelKind kind : {ModelKind::mult, ModelKind::lf_lstm}) {
    ModelConfig cfg;
    cfg.kind = kind;
    cfg.dims = {4, 3, 3};
    cfg.d_k = 3;
    cfg.hidden = 4;
    cfg.head_hidden = 5;
    const Model model = init_model(cfg, 17);
    const std::string text = model_to_string(model);
    const Model back = model_from_string(text, "mem");
    CHECK(back.cfg.kind == cfg.kind);
    CHECK(back.cfg.dims == cfg.dims);
    REQUIRE(back.params.size() == model.params.size());
    for (std::size_t i = 0; i < model.params.size(); ++i) {
      CHECK(back.params[i].first == model.params[i].first);
      CHECK(back.params[i].second == model.params[i].second);
    }
    CHECK(model_to_string(back) == text);
  }
}

TEST_CASE("checkpoint loading rejects drift") {
  const Model model = init_model(small_text_mult({4, 3, 3}), 1);
  const std::string text = model_to_string(model);

  CHECK_THROWS_AS(model_from_string("junk", "mem"), msa::ParseError);

  std::string bad_version = text;
  bad_version.replace(bad_version.find("msa-checkpoint 1"), 16, "msa-checkpoint 2");
  CHECK_THROWS_AS(model_from_string(bad_version, "mem"), msa::ParseError);

  std::string bad_shape = text;
  const auto pos = bad_shape.find("param in.text.wq 4 4");
  REQUIRE(pos != std::string::npos);
  bad_shape.replace(pos, 20, "param in.text.wq 4 5");
  CHECK_THROWS_AS(model_from_string(bad_shape, "mem"), msa::ParseError);

  std::string bad_name = text;
  bad_name.replace(bad_name.find("param in.text.wq"), 16, "param in.text.qq");
  CHECK_THROWS_AS(model_from_string(bad_name, "mem"), msa::ParseError);

  std::string truncated = text.substr(0, text.size() / 2);
  CHECK_THROWS_AS(model_from_string(truncated, "mem"), msa::ParseError);
}

TEST_CASE("checkpoint file io") {
  const Model model = init_model(small_text_mult({4, 3, 3}), 23);
  const auto path = (std::filesystem::temp_directory_path() / "msa_ckpt_test.txt").string();
  save_model(model, path);
  const Model back = load_model(path);
  CHECK(model_to_string(back) == model_to_string(model));
  std::remove(path.c_str());
  CHECK_THROWS_AS(load_model("/nonexistent/ckpt.txt"), msa::IoError);
}
