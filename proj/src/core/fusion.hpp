#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "core/matrix.hpp"
#include "core/rng.hpp"
#include "core/sequences.hpp"
#include "core/tape.hpp"

namespace msa::fusion {

using num::Matrix;
using num::Tape;
using seq::Modality;

enum class ModelKind { mult, lf_lstm };
enum class FusionMode { concat, sum };

ModelKind kind_from_string(const std::string& s);
const char* kind_name(ModelKind k);
FusionMode fusion_from_string(const std::string& s);
const char* fusion_name(FusionMode f);

// Parse "tva"-style modality masks into the canonical t < a < v order.
std::vector<Modality> mask_from_string(const std::string& s);
std::string mask_to_string(const std::vector<Modality>& mask);

struct ModelConfig {
  ModelKind kind = ModelKind::mult;
  std::vector<Modality> mask = {Modality::text, Modality::audio, Modality::video};
  std::array<std::size_t, 3> dims = {16, 12, 10};  // input dims t, a, v
  std::size_t d_k = 8;
  std::size_t hidden = 16;
  std::size_t head_hidden = 16;
  FusionMode fusion = FusionMode::concat;
  bool residual = false;
  double dropout = 0.1;

  void validate() const;
  std::size_t dim(Modality m) const { return dims[static_cast<std::size_t>(m)]; }
  // Width of one modality latent after its incoming CABs are concatenated.
  std::size_t latent_width() const;
};

struct ParamSpec {
  std::string name;
  std::size_t rows, cols;
  std::size_t fan_in;  // init bound 1/sqrt(fan_in)
};

std::vector<ParamSpec> param_specs(const ModelConfig& cfg);

// A model is its config plus an ordered list of named parameter matrices.
struct Model {
  ModelConfig cfg;
  std::vector<std::pair<std::string, Matrix>> params;

  Matrix& param(const std::string& name);
  const Matrix& param(const std::string& name) const;
};

Model init_model(const ModelConfig& cfg, std::uint64_t seed);

// --- building-block operations (plain, tape-free) ---

struct Qkv {
  Matrix q, k, v;
};

Qkv project_qkv(const Matrix& x, const Matrix& wq, const Matrix& wk, const Matrix& wv);

// Z = softmax(Q_x K_y^T / sqrt(d_k)) V_y; queries from x, keys/values from y.
Matrix cab(const Matrix& x_latent, const Matrix& y_latent, const Matrix& wq,
           const Matrix& wk, const Matrix& wv);

Matrix self_attention(const Matrix& x, const Matrix& wq, const Matrix& wk, const Matrix& wv);

// [Z_from_y ; Z_from_k] column concatenation; inputs must share row counts.
Matrix modality_latent(const Matrix& z_from_y, const Matrix& z_from_k);

struct LstmWeights {
  const Matrix &wi, &bi, &wf, &bf, &wo, &bo, &wc, &bc;
};

// Canonical LSTM cell on 1-row state vectors.
std::pair<Matrix, Matrix> lstm_cell(const Matrix& x_row, const Matrix& h_prev,
                                    const Matrix& c_prev, const LstmWeights& w);

// --- full forward passes on a gradient tape ---

struct Forward {
  Tape::NodeId logits = -1;
  std::vector<std::pair<std::string, Tape::NodeId>> param_nodes;
};

// inputs indexed t, a, v; entries outside cfg.mask may be null. Masked
// inputs must be pivot-aligned to a common length >= 1.
Forward model_forward(const Model& model, Tape& tape,
                      const std::array<const Matrix*, 3>& inputs, bool training,
                      Rng* dropout_rng);

Forward model_forward(const Model& model, Tape& tape, const seq::Segment& segment,
                      bool training, Rng* dropout_rng);

}  // namespace msa::fusion
