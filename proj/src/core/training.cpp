#include "core/training.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include <json.hpp>

#include "core/errors.hpp"
#include "core/rng.hpp"

namespace msa::train {

using nlohmann::json;

std::size_t class_index(int label) {
  if (label < -1 || label > 1)
    throw ValidationError("label " + std::to_string(label) + " outside {-1,0,1}");
  return static_cast<std::size_t>(label + 1);
}

int index_class(std::size_t idx) {
  if (idx > 2) throw ValidationError("class index " + std::to_string(idx) + " outside 0..2");
  return static_cast<int>(idx) - 1;
}

std::pair<double, Matrix> cross_entropy_loss(const Matrix& logits, int label) {
  if (logits.rows() != 1 || logits.cols() != 3)
    throw DimensionError("cross_entropy_loss expects 1x3 logits, got " + logits.shape_str());
  if (!logits.all_finite()) throw NumericError("non-finite logits in cross_entropy_loss");
  const std::size_t cls = class_index(label);
  const Matrix p = num::softmax_rows(logits);
  Matrix grad = p;
  grad(0, cls) -= 1.0;
  return {-std::log(p(0, cls)), grad};
}

namespace {

void check_lengths(const std::vector<int>& y_true, const std::vector<int>& y_pred) {
  if (y_true.empty()) throw ValidationError("metric on empty prediction vectors");
  if (y_true.size() != y_pred.size())
    throw ValidationError("metric length mismatch: " + std::to_string(y_true.size()) +
                          " vs " + std::to_string(y_pred.size()));
}

}  // namespace

double mae(const std::vector<int>& y_true, const std::vector<int>& y_pred) {
  check_lengths(y_true, y_pred);
  double s = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) s += std::abs(y_true[i] - y_pred[i]);
  return s / static_cast<double>(y_true.size());
}

double accuracy(const std::vector<int>& y_true, const std::vector<int>& y_pred) {
  check_lengths(y_true, y_pred);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < y_true.size(); ++i)
    if (y_true[i] == y_pred[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(y_true.size());
}

double f1(const std::vector<int>& y_true, const std::vector<int>& y_pred) {
  check_lengths(y_true, y_pred);
  // 3x3 confusion matrix, rows = true, cols = predicted.
  std::size_t cm[3][3] = {};
  for (std::size_t i = 0; i < y_true.size(); ++i)
    ++cm[class_index(y_true[i])][class_index(y_pred[i])];
  double total = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < 3; ++c) {
    std::size_t tp = cm[c][c], fn = 0, fp = 0;
    for (std::size_t k = 0; k < 3; ++k) {
      if (k != c) {
        fn += cm[c][k];
        fp += cm[k][c];
      }
    }
    if (tp + fn == 0) continue;  // class absent from y_true
    ++present;
    if (tp > 0) {
      const double prec = static_cast<double>(tp) / static_cast<double>(tp + fp);
      const double rec = static_cast<double>(tp) / static_cast<double>(tp + fn);
      total += 2.0 * prec * rec / (prec + rec);
    }
  }
  return present > 0 ? total / static_cast<double>(present) : 0.0;
}

void sgd_step(Model& model, const std::vector<std::pair<std::string, Matrix>>& grads,
              double lr) {
  for (const auto& [name, g] : grads) {
    Matrix& p = model.param(name);
    if (!p.same_shape(g))
      throw DimensionError("sgd_step shape mismatch for \"" + name + "\": " + p.shape_str() +
                           " vs " + g.shape_str());
    for (std::size_t k = 0; k < p.size(); ++k) p[k] -= lr * g[k];
  }
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ValidationError("train config: epochs must be >= 1");
  if (batch < 1) throw ValidationError("train config: batch size must be >= 1");
  if (!(lr > 0.0)) throw ValidationError("train config: learning rate must be > 0");
  model.validate();
}

TrainResult train(const Corpus& corpus, const TrainConfig& config) {
  config.validate();
  if (!corpus.is_aligned())
    throw ValidationError("corpus is not aligned; run align before training");
  std::vector<std::size_t> train_idx;
  for (std::size_t i = 0; i < corpus.segments.size(); ++i)
    if (corpus.segments[i].split == Split::train) train_idx.push_back(i);
  if (train_idx.empty()) throw ValidationError("train split is empty");

  TrainResult result;
  result.model = fusion::init_model(config.model, config.seed);
  Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);  // shuffle + dropout stream

  std::map<std::string, Matrix> acc;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(train_idx);
    double epoch_loss = 0.0;
    std::size_t in_batch = 0;
    acc.clear();
    auto flush = [&]() {
      if (in_batch == 0) return;
      std::vector<std::pair<std::string, Matrix>> grads;
      grads.reserve(acc.size());
      for (auto& [name, g] : acc) {
        for (std::size_t k = 0; k < g.size(); ++k) g[k] /= static_cast<double>(in_batch);
        grads.emplace_back(name, std::move(g));
      }
      sgd_step(result.model, grads, config.lr);
      acc.clear();
      in_batch = 0;
    };

    for (std::size_t idx : train_idx) {
      const seq::Segment& s = corpus.segments[idx];
      num::Tape tape;
      fusion::Forward fwd = fusion::model_forward(result.model, tape, s, true, &rng);
      const num::Tape::NodeId loss = tape.cross_entropy(fwd.logits, class_index(s.label));
      epoch_loss += tape.value(loss)(0, 0);
      tape.backward(loss);
      for (const auto& [name, node] : fwd.param_nodes) {
        const Matrix& g = tape.grad(node);
        auto it = acc.find(name);
        if (it == acc.end()) {
          acc.emplace(name, g);
        } else {
          for (std::size_t k = 0; k < g.size(); ++k) it->second[k] += g[k];
        }
      }
      if (++in_batch == config.batch) flush();
    }
    flush();
    result.loss_history.push_back(epoch_loss / static_cast<double>(train_idx.size()));
  }
  return result;
}

int predict(const Model& model, const seq::Segment& segment) {
  num::Tape tape;
  fusion::Forward fwd = fusion::model_forward(model, tape, segment, false, nullptr);
  const Matrix& logits = tape.value(fwd.logits);
  if (!logits.all_finite()) throw NumericError("non-finite logits for segment " + segment.id);
  std::size_t best = 0;
  for (std::size_t j = 1; j < 3; ++j)
    if (logits(0, j) > logits(0, best)) best = j;  // ties stay at the lowest index
  return index_class(best);
}

std::string default_label(const fusion::ModelConfig& cfg) {
  std::string mods = fusion::mask_to_string(cfg.mask);
  // Conventional ordering: TVA for the trimodal variant.
  if (mods == "tav") mods = "tva";
  for (char& c : mods) c = static_cast<char>(std::toupper(c));
  return mods + "-" + (cfg.kind == fusion::ModelKind::mult ? "Mult" : "LFLSTM");
}

MetricsReport evaluate(const Model& model, const Corpus& corpus, Split split,
                       const std::string& label) {
  std::vector<int> y_true, y_pred;
  for (const seq::Segment& s : corpus.segments) {
    if (s.split != split) continue;
    y_true.push_back(s.label);
    y_pred.push_back(predict(model, s));
  }
  if (y_true.empty())
    throw ValidationError(std::string("split \"") + seq::split_name(split) +
                          "\" is empty; nothing to evaluate");
  MetricsReport r;
  r.model_label = label.empty() ? default_label(model.cfg) : label;
  r.accuracy = accuracy(y_true, y_pred);
  r.f1 = f1(y_true, y_pred);
  r.mae = mae(y_true, y_pred);
  r.n = y_true.size();
  r.kind = fusion::kind_name(model.cfg.kind);
  r.modalities = fusion::mask_to_string(model.cfg.mask);
  return r;
}

std::string metrics_to_json(const MetricsReport& r) {
  json j;
  j["model"] = r.model_label;
  j["accuracy"] = r.accuracy;
  j["f1"] = r.f1;
  j["mae"] = r.mae;
  j["n"] = r.n;
  j["kind"] = r.kind;
  j["modalities"] = r.modalities;
  return j.dump();
}

MetricsReport metrics_from_json(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(origin + ": " + e.what());
  }
  MetricsReport r;
  try {
    r.model_label = j.at("model").get<std::string>();
    r.accuracy = j.at("accuracy").get<double>();
    r.f1 = j.at("f1").get<double>();
    r.mae = j.at("mae").get<double>();
    r.n = j.at("n").get<std::size_t>();
    r.kind = j.value("kind", "");
    r.modalities = j.value("modalities", "");
  } catch (const json::exception& e) {
    throw ParseError(origin + ": " + e.what());
  }
  if (r.accuracy < 0.0 || r.accuracy > 1.0 || r.f1 < 0.0 || r.f1 > 1.0 || r.mae < 0.0)
    throw ValidationError(origin + ": metric values out of range");
  return r;
}

namespace {

std::string fmt(double v, int prec = 4) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.*f", prec, v);
  return buf;
}

std::string pad(const std::string& s, std::size_t w) {
  return s.size() >= w ? s : s + std::string(w - s.size(), ' ');
}

}  // namespace

std::string metrics_table_row(const MetricsReport& r) {
  std::ostringstream out;
  out << pad(r.model_label, 14) << pad(fmt(r.accuracy), 10) << pad(fmt(r.f1), 10)
      << pad(fmt(r.mae), 10) << r.n;
  return out.str();
}

std::string render_report(const std::vector<MetricsReport>& reports) {
  if (reports.empty()) throw ValidationError("report needs at least one metrics file");
  std::map<std::string, int> seen;
  for (const MetricsReport& r : reports)
    if (++seen[r.model_label] > 1)
      throw ValidationError("duplicate model label \"" + r.model_label + "\" in report");

  std::ostringstream out;
  out << pad("Model", 14) << pad("Accuracy", 10) << pad("F1", 10) << pad("MAE", 10) << "N\n";
  out << std::string(48, '-') << "\n";
  for (const MetricsReport& r : reports) out << metrics_table_row(r) << "\n";

  for (const std::string kind : {"mult", "lf_lstm"}) {
    const MetricsReport* tva = nullptr;
    const MetricsReport* best_uni = nullptr;
    for (const MetricsReport& r : reports) {
      if (r.kind != kind) continue;
      if (r.modalities.size() == 3) {
        tva = &r;
      } else if (r.modalities.size() == 1) {
        if (best_uni == nullptr || r.accuracy > best_uni->accuracy) best_uni = &r;
      }
    }
    if (tva != nullptr && best_uni != nullptr) {
      const double pts = (tva->accuracy - best_uni->accuracy) * 100.0;
      const double rel = best_uni->accuracy > 0.0
                             ? (tva->accuracy - best_uni->accuracy) / best_uni->accuracy * 100.0
                             : 0.0;
      char line[160];
      std::snprintf(line, sizeof(line),
                    "%s: TVA accuracy vs best unimodal (%s): %+.1f points (%+.1f%% relative)",
                    tva->model_label.c_str(), best_uni->model_label.c_str(), pts, rel);
      out << line << "\n";
    }
  }
  return out.str();
}

}  // namespace msa::train
