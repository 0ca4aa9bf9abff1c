// Pipeline driver: synth -> align -> train -> eval -> report, built on the
// shared library's C API.

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "msa/msa.h"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitValidation = 3;
constexpr int kExitNumeric = 4;

int exit_code_for(int api_code) {
  switch (api_code) {
    case MSA_OK: return kExitOk;
    case MSA_ERR_USAGE: return kExitUsage;
    case MSA_ERR_NUMERIC: return kExitNumeric;
    default: return kExitValidation;  // validation, parse, io
  }
}

const char* error_prefix(int exit_code) {
  switch (exit_code) {
    case kExitUsage: return "E_USAGE";
    case kExitNumeric: return "E_NUMERIC";
    default: return "E_VALIDATION";
  }
}

[[noreturn]] void die(int api_code, const std::string& msg) {
  const int code = exit_code_for(api_code);
  std::cerr << error_prefix(code) << ": " << msg << "\n";
  std::exit(code);
}

void check(int api_code) {
  if (api_code != MSA_OK) die(api_code, msa_last_error());
}

std::uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) die(MSA_ERR_IO, "cannot hash " + path);
  std::uint64_t h = 14695981039346656037ULL;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) die(MSA_ERR_IO, "cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) die(MSA_ERR_IO, "cannot open " + path + " for writing");
  out << text;
  if (!out) die(MSA_ERR_IO, "write failed for " + path);
}

struct ManifestWriter {
  std::string command;
  json config = json::object();
  std::vector<std::string> inputs, outputs;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  void write(const std::string& primary_output) {
    json m;
    m["command"] = command;
    m["config"] = config;
    m["inputs"] = json::array();
    for (const auto& p : inputs)
      m["inputs"].push_back({{"path", p}, {"fnv1a64", hex64(fnv1a64_file(p))}});
    m["outputs"] = json::array();
    for (const auto& p : outputs)
      m["outputs"].push_back({{"path", p}, {"fnv1a64", hex64(fnv1a64_file(p))}});
    m["elapsed_ms"] = std::chrono::duration_cast<std::chrono::milliseconds>(
                          std::chrono::steady_clock::now() - start)
                          .count();
    write_file(primary_output + ".manifest.json", m.dump(1) + "\n");
  }
};

unsigned long long default_seed() {
  if (const char* env = std::getenv("MSA_SEED")) {
    try {
      return std::stoull(env);
    } catch (...) {
      die(MSA_ERR_USAGE, std::string("MSA_SEED is not an integer: ") + env);
    }
  }
  return 1;
}

struct CorpusHandle {
  msa_corpus* ptr = nullptr;
  ~CorpusHandle() { msa_corpus_free(ptr); }
};

struct ModelHandle {
  msa_model* ptr = nullptr;
  ~ModelHandle() { msa_model_free(ptr); }
};

struct StringOut {
  char* ptr = nullptr;
  ~StringOut() { msa_string_free(ptr); }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multimodal sentiment analysis pipeline (synthetic desk-scale corpora)"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
  msa_synth_opts sopts;
  msa_synth_opts_default(&sopts);
  std::string synth_mode = sopts.mode, synth_out;
  int synth_segments = sopts.segments;
  int text_dim = sopts.text_dim, audio_dim = sopts.audio_dim, video_dim = sopts.video_dim;
  double synth_noise = sopts.noise;
  double synth_amplitude = sopts.amplitude;
  unsigned long long synth_seed = default_seed();
  synth->add_option("--mode", synth_mode, "unimodal|crossmodal");
  synth->add_option("--segments", synth_segments, "number of segments");
  synth->add_option("--text-dim", text_dim);
  synth->add_option("--audio-dim", audio_dim);
  synth->add_option("--video-dim", video_dim);
  synth->add_option("--noise", synth_noise, "gaussian noise level");
  synth->add_option("--amplitude", synth_amplitude, "planted signal strength");
  synth->add_option("--seed", synth_seed);
  synth->add_option("--out", synth_out, "output corpus path")->required();

  // align
  auto* align = app.add_subcommand("align", "Pivot-align a corpus onto the text timeline");
  std::string align_in, align_out, align_collapse = "mean";
  align->add_option("--in", align_in)->required();
  align->add_option("--out", align_out)->required();
  align->add_option("--collapse", align_collapse, "mean|max");

  // train
  auto* train = app.add_subcommand("train", "Train a fusion model on an aligned corpus");
  msa_train_opts topts;
  msa_train_opts_default(&topts);
  std::string train_in, train_out, train_history;
  std::string train_model = topts.model, train_modalities = topts.modalities,
              train_fusion = topts.fusion;
  int train_epochs = topts.epochs, train_batch = topts.batch, train_dk = topts.d_k,
      train_hidden = topts.hidden;
  double train_lr = topts.lr, train_dropout = topts.dropout;
  unsigned long long train_seed = default_seed();
  train->add_option("--in", train_in, "aligned corpus")->required();
  train->add_option("--out", train_out, "checkpoint path")->required();
  train->add_option("--history", train_history, "loss history JSON path");
  train->add_option("--model", train_model, "mult|lf_lstm");
  train->add_option("--modalities", train_modalities, "subset of tav, e.g. tva or t");
  train->add_option("--fusion", train_fusion, "concat|sum");
  train->add_option("--epochs", train_epochs);
  train->add_option("--batch", train_batch);
  train->add_option("--lr", train_lr);
  train->add_option("--dropout", train_dropout);
  train->add_option("--dk", train_dk, "attention key dimension");
  train->add_option("--hidden", train_hidden, "LSTM hidden size");
  train->add_option("--seed", train_seed);

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on one split");
  std::string eval_model, eval_corpus, eval_split = "test", eval_label, eval_out;
  eval->add_option("--model", eval_model, "checkpoint path")->required();
  eval->add_option("--in", eval_corpus, "aligned corpus")->required();
  eval->add_option("--split", eval_split, "train|valid|test");
  eval->add_option("--label", eval_label, "report label override");
  eval->add_option("--out", eval_out, "metrics JSON path")->required();

  // report
  auto* report = app.add_subcommand("report", "Render a comparison table from metric files");
  std::vector<std::string> report_files;
  std::string report_out;
  report->add_option("files", report_files, "metrics JSON files")->required();
  report->add_option("--out", report_out, "also write the table to this path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "E_USAGE: " << e.what() << "\n";
    return kExitUsage;
  }

  if (synth->parsed()) {
    ManifestWriter mw;
    mw.command = "synth";
    mw.config = {{"mode", synth_mode},   {"segments", synth_segments},
                 {"text_dim", text_dim}, {"audio_dim", audio_dim},
                 {"video_dim", video_dim}, {"noise", synth_noise},
                 {"amplitude", synth_amplitude}, {"seed", synth_seed}};
    sopts.mode = synth_mode.c_str();
    sopts.segments = synth_segments;
    sopts.text_dim = text_dim;
    sopts.audio_dim = audio_dim;
    sopts.video_dim = video_dim;
    sopts.noise = synth_noise;
    sopts.amplitude = synth_amplitude;
    CorpusHandle c;
    check(msa_corpus_synth(&sopts, synth_seed, &c.ptr));
    check(msa_corpus_save(c.ptr, synth_out.c_str()));
    mw.outputs.push_back(synth_out);
    mw.write(synth_out);
    std::cout << "wrote " << synth_out << " (" << synth_segments << " segments)\n";
  } else if (align->parsed()) {
    ManifestWriter mw;
    mw.command = "align";
    mw.config = {{"collapse", align_collapse}};
    CorpusHandle in, out;
    check(msa_corpus_load(align_in.c_str(), &in.ptr));
    check(msa_corpus_align(in.ptr, align_collapse.c_str(), &out.ptr));
    check(msa_corpus_save(out.ptr, align_out.c_str()));
    mw.inputs.push_back(align_in);
    mw.outputs.push_back(align_out);
    mw.write(align_out);
    std::cout << "wrote " << align_out << "\n";
  } else if (train->parsed()) {
    ManifestWriter mw;
    mw.command = "train";
    mw.config = {{"model", train_model},   {"modalities", train_modalities},
                 {"fusion", train_fusion}, {"epochs", train_epochs},
                 {"batch", train_batch},   {"lr", train_lr},
                 {"dropout", train_dropout}, {"d_k", train_dk},
                 {"hidden", train_hidden}, {"seed", train_seed}};
    topts.model = train_model.c_str();
    topts.modalities = train_modalities.c_str();
    topts.fusion = train_fusion.c_str();
    topts.epochs = train_epochs;
    topts.batch = train_batch;
    topts.lr = train_lr;
    topts.dropout = train_dropout;
    topts.d_k = train_dk;
    topts.hidden = train_hidden;
    topts.seed = train_seed;
    CorpusHandle c;
    check(msa_corpus_load(train_in.c_str(), &c.ptr));
    ModelHandle m;
    StringOut history;
    check(msa_model_train(c.ptr, &topts, &m.ptr, &history.ptr));
    check(msa_model_save(m.ptr, train_out.c_str()));
    json hist = json::parse(history.ptr);
    if (!train_history.empty()) {
      write_file(train_history, hist.dump() + "\n");
      mw.outputs.push_back(train_history);
    }
    mw.config["final_train_loss"] = hist.empty() ? json() : hist.back();
    mw.inputs.push_back(train_in);
    mw.outputs.push_back(train_out);
    mw.write(train_out);
    std::cout << "wrote " << train_out << " (final train loss "
              << (hist.empty() ? json() : hist.back()).dump() << ")\n";
  } else if (eval->parsed()) {
    ManifestWriter mw;
    mw.command = "eval";
    mw.config = {{"split", eval_split}, {"label", eval_label}};
    CorpusHandle c;
    ModelHandle m;
    check(msa_corpus_load(eval_corpus.c_str(), &c.ptr));
    check(msa_model_load(eval_model.c_str(), &m.ptr));
    StringOut metrics;
    check(msa_model_evaluate(m.ptr, c.ptr, eval_split.c_str(),
                             eval_label.empty() ? nullptr : eval_label.c_str(),
                             &metrics.ptr));
    write_file(eval_out, std::string(metrics.ptr) + "\n");
    const char* one[] = {metrics.ptr};
    StringOut table;
    check(msa_report_render(one, 1, &table.ptr));
    std::cout << table.ptr;
    mw.inputs.push_back(eval_corpus);
    mw.inputs.push_back(eval_model);
    mw.outputs.push_back(eval_out);
    mw.write(eval_out);
  } else if (report->parsed()) {
    std::vector<std::string> docs;
    std::vector<const char*> ptrs;
    for (const std::string& f : report_files) docs.push_back(read_file(f));
    for (const std::string& d : docs) ptrs.push_back(d.c_str());
    StringOut table;
    check(msa_report_render(ptrs.data(), static_cast<int>(ptrs.size()), &table.ptr));
    std::cout << table.ptr;
    if (!report_out.empty()) {
      ManifestWriter mw;
      mw.command = "report";
      mw.config = {{"files", report_files}};
      write_file(report_out, table.ptr);
      for (const std::string& f : report_files) mw.inputs.push_back(f);
      mw.outputs.push_back(report_out);
      mw.write(report_out);
    }
  }
  return kExitOk;
}
