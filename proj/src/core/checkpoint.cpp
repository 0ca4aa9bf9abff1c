#include "core/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "core/errors.hpp"

namespace msa::fusion {

namespace {

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string model_to_string(const Model& model) {
  const ModelConfig& cfg = model.cfg;
  std::ostringstream out;
  out << "msa-checkpoint 1\n";
  out << "kind " << kind_name(cfg.kind) << "\n";
  out << "modalities " << mask_to_string(cfg.mask) << "\n";
  out << "fusion " << fusion_name(cfg.fusion) << "\n";
  out << "dims " << cfg.dims[0] << " " << cfg.dims[1] << " " << cfg.dims[2] << "\n";
  out << "d_k " << cfg.d_k << "\n";
  out << "hidden " << cfg.hidden << "\n";
  out << "head_hidden " << cfg.head_hidden << "\n";
  out << "dropout " << fmt_double(cfg.dropout) << "\n";
  out << "residual " << (cfg.residual ? 1 : 0) << "\n";
  out << "params " << model.params.size() << "\n";
  for (const auto& [name, m] : model.params) {
    out << "param " << name << " " << m.rows() << " " << m.cols() << "\n";
    for (std::size_t i = 0; i < m.rows(); ++i) {
      for (std::size_t j = 0; j < m.cols(); ++j) {
        if (j) out << " ";
        out << fmt_double(m(i, j));
      }
      out << "\n";
    }
  }
  return out.str();
}

Model model_from_string(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  auto fail = [&origin](const std::string& msg) -> void {
    throw ParseError(origin + ": " + msg);
  };

  std::string word;
  auto expect_key = [&](const std::string& key) {
    if (!(in >> word) || word != key) fail("expected \"" + key + "\"");
    return true;
  };

  expect_key("msa-checkpoint");
  int version = 0;
  in >> version;
  if (version != 1) fail("unsupported checkpoint version");

  ModelConfig cfg;
  expect_key("kind");
  in >> word;
  cfg.kind = kind_from_string(word);
  expect_key("modalities");
  in >> word;
  cfg.mask = mask_from_string(word);
  expect_key("fusion");
  in >> word;
  cfg.fusion = fusion_from_string(word);
  expect_key("dims");
  in >> cfg.dims[0] >> cfg.dims[1] >> cfg.dims[2];
  expect_key("d_k");
  in >> cfg.d_k;
  expect_key("hidden");
  in >> cfg.hidden;
  expect_key("head_hidden");
  in >> cfg.head_hidden;
  expect_key("dropout");
  in >> cfg.dropout;
  expect_key("residual");
  int res = 0;
  in >> res;
  cfg.residual = res != 0;
  expect_key("params");
  std::size_t n_params = 0;
  in >> n_params;
  if (!in) fail("malformed header");

  const std::vector<ParamSpec> specs = param_specs(cfg);
  if (n_params != specs.size())
    fail("parameter count " + std::to_string(n_params) + " does not match config (expected " +
         std::to_string(specs.size()) + ")");

  Model model;
  model.cfg = cfg;
  for (const ParamSpec& spec : specs) {
    std::string name;
    std::size_t rows = 0, cols = 0;
    expect_key("param");
    if (!(in >> name >> rows >> cols)) fail("malformed parameter header");
    if (name != spec.name)
      fail("parameter \"" + name + "\" out of order (expected \"" + spec.name + "\")");
    if (rows != spec.rows || cols != spec.cols)
      fail("parameter \"" + name + "\" shape " + std::to_string(rows) + "x" +
           std::to_string(cols) + " does not match expected " + std::to_string(spec.rows) +
           "x" + std::to_string(spec.cols));
    num::Matrix m(rows, cols);
    for (std::size_t k = 0; k < m.size(); ++k)
      if (!(in >> m[k])) fail("truncated values for parameter \"" + name + "\"");
    model.params.emplace_back(name, std::move(m));
  }
  return model;
}

void save_model(const Model& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << model_to_string(model);
  if (!out) throw IoError("write failed for " + path);
}

Model load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return model_from_string(buf.str(), path);
}

}  // namespace msa::fusion
