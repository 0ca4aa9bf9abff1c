#include "core/fusion.hpp"

#include <algorithm>
#include <cmath>

#include "core/errors.hpp"

namespace msa::fusion {

ModelKind kind_from_string(const std::string& s) {
  if (s == "mult") return ModelKind::mult;
  if (s == "lf_lstm") return ModelKind::lf_lstm;
  throw ValidationError("unknown model kind \"" + s + "\" (expected mult|lf_lstm)");
}

const char* kind_name(ModelKind k) { return k == ModelKind::mult ? "mult" : "lf_lstm"; }

FusionMode fusion_from_string(const std::string& s) {
  if (s == "concat") return FusionMode::concat;
  if (s == "sum") return FusionMode::sum;
  throw ValidationError("unknown fusion mode \"" + s + "\" (expected concat|sum)");
}

const char* fusion_name(FusionMode f) { return f == FusionMode::concat ? "concat" : "sum"; }

std::vector<Modality> mask_from_string(const std::string& s) {
  bool has[3] = {false, false, false};
  for (char c : s) {
    switch (c) {
      case 't': has[0] = true; break;
      case 'a': has[1] = true; break;
      case 'v': has[2] = true; break;
      default:
        throw ValidationError("modality mask \"" + s + "\" may only contain t, a, v");
    }
  }
  std::vector<Modality> mask;
  if (has[0]) mask.push_back(Modality::text);
  if (has[1]) mask.push_back(Modality::audio);
  if (has[2]) mask.push_back(Modality::video);
  if (mask.empty()) throw ValidationError("modality mask must be non-empty");
  return mask;
}

std::string mask_to_string(const std::vector<Modality>& mask) {
  std::string s;
  for (Modality m : mask) s += modality_name(m)[0];
  return s;
}

namespace {

const char* mname(Modality m) { return seq::modality_name(m); }

std::vector<Modality> sources_of(const std::vector<Modality>& mask, Modality x) {
  std::vector<Modality> src;
  for (Modality y : mask)
    if (y != x) src.push_back(y);
  if (src.empty()) src.push_back(x);  // unimodal: CAB degenerates to self-attention
  return src;
}

}  // namespace

void ModelConfig::validate() const {
  if (mask.empty()) throw ValidationError("model config: modality mask must be non-empty");
  for (Modality m : mask)
    if (dim(m) == 0)
      throw ValidationError(std::string("model config: zero input dim for modality ") + mname(m));
  if (kind == ModelKind::mult && d_k == 0)
    throw ValidationError("model config: d_k must be positive");
  if (kind == ModelKind::lf_lstm && (hidden == 0 || head_hidden == 0))
    throw ValidationError("model config: hidden sizes must be positive");
  if (dropout < 0.0 || dropout >= 1.0)
    throw ValidationError("model config: dropout must be in [0, 1)");
}

std::size_t ModelConfig::latent_width() const {
  return sources_of(mask, mask[0]).size() * d_k;
}

std::vector<ParamSpec> param_specs(const ModelConfig& cfg) {
  cfg.validate();
  std::vector<ParamSpec> specs;
  if (cfg.kind == ModelKind::mult) {
    for (Modality m : cfg.mask) {
      const std::string p = std::string("in.") + mname(m) + ".";
      for (const char* w : {"wq", "wk", "wv"})
        specs.push_back({p + w, cfg.dim(m), cfg.d_k, cfg.dim(m)});
    }
    for (Modality x : cfg.mask) {
      for (Modality y : sources_of(cfg.mask, x)) {
        const std::string p =
            std::string("cab.") + mname(x) + "_from_" + mname(y) + ".";
        for (const char* w : {"wq", "wk", "wv"})
          specs.push_back({p + w, cfg.d_k, cfg.d_k, cfg.d_k});
      }
    }
    const std::size_t w = cfg.latent_width();
    for (Modality m : cfg.mask) {
      const std::string p = std::string("out.") + mname(m) + ".";
      for (const char* n : {"wq", "wk", "wv"}) specs.push_back({p + n, w, w, w});
    }
    const std::size_t head_in =
        cfg.fusion == FusionMode::concat ? cfg.mask.size() * w : w;
    specs.push_back({"head.w", head_in, 3, head_in});
    specs.push_back({"head.b", 1, 3, head_in});
  } else {
    const std::size_t h = cfg.hidden;
    for (Modality m : cfg.mask) {
      const std::size_t in1 = cfg.dim(m) + h;
      for (const char* g : {"i", "f", "o", "c"}) {
        specs.push_back({std::string("lstm1.") + mname(m) + ".w" + g, in1, h, in1});
        specs.push_back({std::string("lstm1.") + mname(m) + ".b" + g, 1, h, in1});
      }
      specs.push_back({std::string("norm.") + mname(m) + ".gain", 1, h, h});
      specs.push_back({std::string("norm.") + mname(m) + ".bias", 1, h, h});
      const std::size_t in2 = h + h;
      for (const char* g : {"i", "f", "o", "c"}) {
        specs.push_back({std::string("lstm2.") + mname(m) + ".w" + g, in2, h, in2});
        specs.push_back({std::string("lstm2.") + mname(m) + ".b" + g, 1, h, in2});
      }
    }
    const std::size_t head_in = 2 * h * cfg.mask.size();
    specs.push_back({"head.fc1.w", head_in, cfg.head_hidden, head_in});
    specs.push_back({"head.fc1.b", 1, cfg.head_hidden, head_in});
    specs.push_back({"head.fc2.w", cfg.head_hidden, 3, cfg.head_hidden});
    specs.push_back({"head.fc2.b", 1, 3, cfg.head_hidden});
  }
  return specs;
}

Matrix& Model::param(const std::string& name) {
  for (auto& [n, m] : params)
    if (n == name) return m;
  throw StateError("unknown parameter \"" + name + "\"");
}

const Matrix& Model::param(const std::string& name) const {
  return const_cast<Model*>(this)->param(name);
}

Model init_model(const ModelConfig& cfg, std::uint64_t seed) {
  Model model;
  model.cfg = cfg;
  Rng rng(seed);
  for (const ParamSpec& s : param_specs(cfg)) {
    Matrix m(s.rows, s.cols);
    const double bound = 1.0 / std::sqrt(static_cast<double>(s.fan_in));
    for (std::size_t k = 0; k < m.size(); ++k) m[k] = rng.uniform(-bound, bound);
    // Layer-norm starts as the identity transform.
    if (s.name.find("norm.") == 0) {
      const double v = s.name.ends_with("gain") ? 1.0 : 0.0;
      for (std::size_t k = 0; k < m.size(); ++k) m[k] = v;
    }
    model.params.emplace_back(s.name, std::move(m));
  }
  return model;
}

Qkv project_qkv(const Matrix& x, const Matrix& wq, const Matrix& wk, const Matrix& wv) {
  return Qkv{num::matmul(x, wq), num::matmul(x, wk), num::matmul(x, wv)};
}

Matrix cab(const Matrix& x_latent, const Matrix& y_latent, const Matrix& wq,
           const Matrix& wk, const Matrix& wv) {
  if (wq.cols() != wk.cols() || wq.cols() != wv.cols())
    throw DimensionError("cab: projection output widths (d_k) must agree");
  const Matrix q = num::matmul(x_latent, wq);
  const Matrix k = num::matmul(y_latent, wk);
  const Matrix v = num::matmul(y_latent, wv);
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  const Matrix weights =
      num::softmax_rows(num::scale(num::matmul(q, num::transpose(k)), inv_sqrt_dk));
  return num::matmul(weights, v);
}

Matrix self_attention(const Matrix& x, const Matrix& wq, const Matrix& wk, const Matrix& wv) {
  return cab(x, x, wq, wk, wv);
}

Matrix modality_latent(const Matrix& z_from_y, const Matrix& z_from_k) {
  if (z_from_y.rows() != z_from_k.rows())
    throw DimensionError("modality_latent: row counts differ (" + z_from_y.shape_str() +
                         " vs " + z_from_k.shape_str() + ")");
  return num::concat_cols(z_from_y, z_from_k);
}

std::pair<Matrix, Matrix> lstm_cell(const Matrix& x_row, const Matrix& h_prev,
                                    const Matrix& c_prev, const LstmWeights& w) {
  const Matrix xin = num::concat_cols(x_row, h_prev);
  const Matrix i = num::sigmoid(num::add(num::matmul(xin, w.wi), w.bi));
  const Matrix f = num::sigmoid(num::add(num::matmul(xin, w.wf), w.bf));
  const Matrix o = num::sigmoid(num::add(num::matmul(xin, w.wo), w.bo));
  const Matrix g = num::tanh_m(num::add(num::matmul(xin, w.wc), w.bc));
  const Matrix c = num::add(num::mul(f, c_prev), num::mul(i, g));
  const Matrix h = num::mul(o, num::tanh_m(c));
  return {h, c};
}

namespace {

struct TapeCtx {
  Tape& tape;
  const Model& model;
  std::vector<std::pair<std::string, Tape::NodeId>> param_nodes;

  Tape::NodeId p(const std::string& name) {
    for (const auto& [n, id] : param_nodes)
      if (n == name) return id;
    Tape::NodeId id = tape.leaf(model.param(name));
    param_nodes.emplace_back(name, id);
    return id;
  }
};

Tape::NodeId attention(TapeCtx& ctx, Tape::NodeId q_src, Tape::NodeId kv_src,
                       const std::string& prefix, bool residual) {
  Tape& t = ctx.tape;
  const Tape::NodeId q = t.matmul(q_src, ctx.p(prefix + ".wq"));
  const Tape::NodeId k = t.matmul(kv_src, ctx.p(prefix + ".wk"));
  const Tape::NodeId v = t.matmul(kv_src, ctx.p(prefix + ".wv"));
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(t.value(q).cols()));
  const Tape::NodeId weights =
      t.softmax_rows(t.scale(t.matmul(q, t.transpose(k)), inv_sqrt_dk));
  Tape::NodeId out = t.matmul(weights, v);
  if (residual && t.value(out).same_shape(t.value(q_src))) out = t.add(out, q_src);
  return out;
}

Tape::NodeId mult_forward(TapeCtx& ctx, const std::array<Tape::NodeId, 3>& x) {
  Tape& t = ctx.tape;
  const ModelConfig& cfg = ctx.model.cfg;
  std::array<Tape::NodeId, 3> latent{-1, -1, -1};
  for (Modality m : cfg.mask) {
    const auto mi = static_cast<std::size_t>(m);
    latent[mi] = attention(ctx, x[mi], x[mi], std::string("in.") + mname(m), cfg.residual);
  }
  std::vector<Tape::NodeId> pooled;
  for (Modality xm : cfg.mask) {
    const auto xi = static_cast<std::size_t>(xm);
    std::vector<Tape::NodeId> zs;
    for (Modality ym : sources_of(cfg.mask, xm)) {
      const auto yi = static_cast<std::size_t>(ym);
      zs.push_back(attention(ctx, latent[xi], latent[yi],
                             std::string("cab.") + mname(xm) + "_from_" + mname(ym),
                             cfg.residual));
    }
    const Tape::NodeId z = zs.size() == 1 ? zs[0] : t.concat_cols(zs);
    const Tape::NodeId out =
        attention(ctx, z, z, std::string("out.") + mname(xm), cfg.residual);
    pooled.push_back(t.mean_pool_rows(out));
  }
  Tape::NodeId fused;
  if (cfg.fusion == FusionMode::concat) {
    fused = pooled.size() == 1 ? pooled[0] : t.concat_cols(pooled);
  } else {
    fused = pooled[0];
    for (std::size_t k = 1; k < pooled.size(); ++k) fused = t.add(fused, pooled[k]);
  }
  return t.add(t.matmul(fused, ctx.p("head.w")), ctx.p("head.b"));
}

struct LstmNodes {
  Tape::NodeId wi, bi, wf, bf, wo, bo, wc, bc;
};

LstmNodes lstm_nodes(TapeCtx& ctx, const std::string& prefix) {
  return {ctx.p(prefix + ".wi"), ctx.p(prefix + ".bi"), ctx.p(prefix + ".wf"),
          ctx.p(prefix + ".bf"), ctx.p(prefix + ".wo"), ctx.p(prefix + ".bo"),
          ctx.p(prefix + ".wc"), ctx.p(prefix + ".bc")};
}

std::pair<Tape::NodeId, Tape::NodeId> lstm_cell_tape(Tape& t, Tape::NodeId x_row,
                                                     Tape::NodeId h_prev,
                                                     Tape::NodeId c_prev,
                                                     const LstmNodes& w) {
  const Tape::NodeId xin = t.concat_cols({x_row, h_prev});
  const Tape::NodeId i = t.sigmoid(t.add(t.matmul(xin, w.wi), w.bi));
  const Tape::NodeId f = t.sigmoid(t.add(t.matmul(xin, w.wf), w.bf));
  const Tape::NodeId o = t.sigmoid(t.add(t.matmul(xin, w.wo), w.bo));
  const Tape::NodeId g = t.tanh_(t.add(t.matmul(xin, w.wc), w.bc));
  const Tape::NodeId c = t.add(t.mul(f, c_prev), t.mul(i, g));
  const Tape::NodeId h = t.mul(o, t.tanh_(c));
  return {h, c};
}

// Runs one LSTM over the rows of `x`, returning (stacked h sequence, final h).
std::pair<Tape::NodeId, Tape::NodeId> lstm_run(Tape& t, Tape::NodeId x,
                                               const LstmNodes& w, std::size_t hidden) {
  Tape::NodeId h = t.leaf(Matrix(1, hidden));
  Tape::NodeId c = t.leaf(Matrix(1, hidden));
  std::vector<Tape::NodeId> hs;
  const std::size_t l = t.value(x).rows();
  for (std::size_t step = 0; step < l; ++step) {
    auto [hn, cn] = lstm_cell_tape(t, t.row(x, step), h, c, w);
    h = hn;
    c = cn;
    hs.push_back(h);
  }
  return {t.stack_rows(hs), h};
}

Tape::NodeId lf_lstm_forward(TapeCtx& ctx, const std::array<Tape::NodeId, 3>& x,
                             bool training, Rng* dropout_rng) {
  Tape& t = ctx.tape;
  const ModelConfig& cfg = ctx.model.cfg;
  std::vector<Tape::NodeId> features;
  for (Modality m : cfg.mask) {
    const auto mi = static_cast<std::size_t>(m);
    auto [h1_seq, h1_final] =
        lstm_run(t, x[mi], lstm_nodes(ctx, std::string("lstm1.") + mname(m)), cfg.hidden);
    const Tape::NodeId normed =
        t.layer_norm(h1_seq, ctx.p(std::string("norm.") + mname(m) + ".gain"),
                     ctx.p(std::string("norm.") + mname(m) + ".bias"));
    auto [h2_seq, h2_final] =
        lstm_run(t, normed, lstm_nodes(ctx, std::string("lstm2.") + mname(m)), cfg.hidden);
    (void)h2_seq;
    features.push_back(h2_final);  // concat order [h2_m ; h1_m] per modality
    features.push_back(h1_final);
  }
  const Tape::NodeId fused = features.size() == 1 ? features[0] : t.concat_cols(features);
  Tape::NodeId hid = t.relu(t.add(t.matmul(fused, ctx.p("head.fc1.w")), ctx.p("head.fc1.b")));
  if (training && cfg.dropout > 0.0) {
    if (dropout_rng == nullptr)
      throw StateError("training forward requires a dropout rng");
    Matrix mask(1, ctx.model.cfg.head_hidden);
    const double keep = 1.0 - cfg.dropout;
    for (std::size_t k = 0; k < mask.size(); ++k)
      mask[k] = dropout_rng->uniform() < keep ? 1.0 / keep : 0.0;
    hid = t.mul_const(hid, std::move(mask));
  }
  return t.add(t.matmul(hid, ctx.p("head.fc2.w")), ctx.p("head.fc2.b"));
}

}  // namespace

Forward model_forward(const Model& model, Tape& tape,
                      const std::array<const Matrix*, 3>& inputs, bool training,
                      Rng* dropout_rng) {
  const ModelConfig& cfg = model.cfg;
  std::size_t len = 0;
  for (Modality m : cfg.mask) {
    const Matrix* x = inputs[static_cast<std::size_t>(m)];
    if (x == nullptr)
      throw ValidationError(std::string("missing input for modality ") + mname(m));
    if (x->rows() == 0)
      throw ValidationError(std::string("empty input sequence for modality ") + mname(m));
    if (x->cols() != cfg.dim(m))
      throw DimensionError(std::string("input dim mismatch for modality ") + mname(m) +
                           ": got " + std::to_string(x->cols()) + ", model expects " +
                           std::to_string(cfg.dim(m)));
    if (len == 0) len = x->rows();
    if (x->rows() != len)
      throw ValidationError("modality sequence lengths differ; run align first");
  }

  TapeCtx ctx{tape, model, {}};
  std::array<Tape::NodeId, 3> x{-1, -1, -1};
  for (Modality m : cfg.mask) {
    const auto mi = static_cast<std::size_t>(m);
    x[mi] = tape.leaf(*inputs[mi]);
  }
  Forward fwd;
  fwd.logits = cfg.kind == ModelKind::mult ? mult_forward(ctx, x)
                                           : lf_lstm_forward(ctx, x, training, dropout_rng);
  fwd.param_nodes = std::move(ctx.param_nodes);
  return fwd;
}

Forward model_forward(const Model& model, Tape& tape, const seq::Segment& segment,
                      bool training, Rng* dropout_rng) {
  const std::array<const Matrix*, 3> inputs = {&segment.text.features,
                                               &segment.audio.features,
                                               &segment.video.features};
  return model_forward(model, tape, inputs, training, dropout_rng);
}

}  // namespace msa::fusion
