#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/fusion.hpp"
#include "core/sequences.hpp"

namespace msa::train {

using fusion::Model;
using num::Matrix;
using seq::Corpus;
using seq::Split;

// Class <-> logit index mapping: -1 -> 0, 0 -> 1, +1 -> 2.
std::size_t class_index(int label);
int index_class(std::size_t idx);

// Softmax cross-entropy of 1x3 logits against a polarity label.
// Returns (loss, gradient wrt logits).
std::pair<double, Matrix> cross_entropy_loss(const Matrix& logits, int label);

double mae(const std::vector<int>& y_true, const std::vector<int>& y_pred);
double accuracy(const std::vector<int>& y_true, const std::vector<int>& y_pred);
// Macro-F1 over the classes present in y_true; a present class with no
// true positives contributes 0.
double f1(const std::vector<int>& y_true, const std::vector<int>& y_pred);

// p <- p - lr * g, by parameter name.
void sgd_step(Model& model, const std::vector<std::pair<std::string, Matrix>>& grads,
              double lr);

struct TrainConfig {
  std::size_t epochs = 150;
  std::size_t batch = 8;
  double lr = 0.05;
  std::uint64_t seed = 1;
  fusion::ModelConfig model;

  void validate() const;
};

struct TrainResult {
  Model model;
  std::vector<double> loss_history;  // mean train loss per epoch
};

// Deterministic given (corpus, config): init, shuffling, and dropout masks
// all derive from config.seed.
TrainResult train(const Corpus& aligned_corpus, const TrainConfig& config);

struct MetricsReport {
  std::string model_label;
  double accuracy = 0.0;
  double f1 = 0.0;
  double mae = 0.0;
  std::size_t n = 0;
  std::string kind;        // "mult" | "lf_lstm"
  std::string modalities;  // "t" | "tva" | ...
};

MetricsReport evaluate(const Model& model, const Corpus& corpus, Split split,
                       const std::string& label = "");

// Argmax with ties broken toward the lowest class index.
int predict(const Model& model, const seq::Segment& segment);

std::string metrics_to_json(const MetricsReport& r);
MetricsReport metrics_from_json(const std::string& text, const std::string& origin);
std::string metrics_table_row(const MetricsReport& r);

// Fixed-width comparison table with a TVA-vs-best-unimodal delta footer per
// model kind when both are present. Duplicate labels are an error.
std::string render_report(const std::vector<MetricsReport>& reports);

std::string default_label(const fusion::ModelConfig& cfg);

}  // namespace msa::train
