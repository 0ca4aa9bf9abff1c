#include "msa/msa.h"

#include <cstring>
#include <string>

#include <json.hpp>

#include "core/alignment.hpp"
#include "core/checkpoint.hpp"
#include "core/errors.hpp"
#include "core/sequences.hpp"
#include "core/training.hpp"

struct msa_corpus {
  msa::seq::Corpus corpus;
};

struct msa_model {
  msa::fusion::Model model;
};

namespace {

thread_local std::string g_last_error;

int fail(int code, const std::string& msg) {
  g_last_error = msg;
  return code;
}

template <typename F>
int guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return MSA_OK;
  } catch (const msa::Error& e) {
    return fail(static_cast<int>(e.code()), e.what());
  } catch (const std::exception& e) {
    return fail(MSA_ERR_VALIDATION, e.what());
  }
}

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void require(bool ok, const char* what) {
  if (!ok) throw msa::UsageError(what);
}

}  // namespace

extern "C" {

const char* msa_last_error(void) { return g_last_error.c_str(); }

void msa_string_free(char* s) { delete[] s; }

void msa_synth_opts_default(msa_synth_opts* opts) {
  if (opts == nullptr) return;
  opts->mode = "crossmodal";
  opts->segments = 300;
  opts->text_dim = 16;
  opts->audio_dim = 12;
  opts->video_dim = 10;
  opts->noise = 0.1;
  opts->amplitude = 2.0;
  opts->words_min = 6;
  opts->words_max = 12;
}

int msa_corpus_synth(const msa_synth_opts* opts, unsigned long long seed, msa_corpus** out) {
  return guarded([&] {
    require(opts != nullptr && out != nullptr, "msa_corpus_synth: null argument");
    require(opts->mode != nullptr, "msa_corpus_synth: null mode");
    msa::seq::SynthConfig cfg;
    const std::string mode = opts->mode;
    if (mode == "unimodal")
      cfg.mode = msa::seq::SynthMode::unimodal;
    else if (mode == "crossmodal")
      cfg.mode = msa::seq::SynthMode::crossmodal;
    else
      throw msa::UsageError("unknown synth mode \"" + mode + "\"");
    require(opts->segments > 0, "msa_corpus_synth: segments must be >= 1");
    require(opts->text_dim > 0 && opts->audio_dim > 0 && opts->video_dim > 0,
            "msa_corpus_synth: dims must be positive");
    cfg.segments = static_cast<std::size_t>(opts->segments);
    cfg.dims = {static_cast<std::size_t>(opts->text_dim),
                static_cast<std::size_t>(opts->audio_dim),
                static_cast<std::size_t>(opts->video_dim)};
    cfg.noise = opts->noise;
    require(opts->amplitude > 0.0, "msa_corpus_synth: amplitude must be > 0");
    cfg.amplitude = opts->amplitude;
    require(opts->words_min >= 1 && opts->words_max >= opts->words_min,
            "msa_corpus_synth: invalid words_min/words_max");
    cfg.words_min = static_cast<std::size_t>(opts->words_min);
    cfg.words_max = static_cast<std::size_t>(opts->words_max);
    *out = new msa_corpus{msa::seq::synth_generate(cfg, seed)};
  });
}

int msa_corpus_load(const char* path, msa_corpus** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "msa_corpus_load: null argument");
    *out = new msa_corpus{msa::seq::load_corpus(path)};
  });
}

int msa_corpus_save(const msa_corpus* corpus, const char* path) {
  return guarded([&] {
    require(corpus != nullptr && path != nullptr, "msa_corpus_save: null argument");
    msa::seq::save_corpus(corpus->corpus, path);
  });
}

int msa_corpus_align(const msa_corpus* corpus, const char* collapse, msa_corpus** out) {
  return guarded([&] {
    require(corpus != nullptr && collapse != nullptr && out != nullptr,
            "msa_corpus_align: null argument");
    *out = new msa_corpus{
        msa::align::align_corpus(corpus->corpus, msa::align::collapse_from_string(collapse))};
  });
}

int msa_corpus_is_aligned(const msa_corpus* corpus) {
  if (corpus == nullptr) return 0;
  return corpus->corpus.is_aligned() ? 1 : 0;
}

int msa_corpus_stats_json(const msa_corpus* corpus, char** json_out) {
  return guarded([&] {
    require(corpus != nullptr && json_out != nullptr, "msa_corpus_stats_json: null argument");
    *json_out = dup_string(msa::seq::stats_to_json(msa::seq::corpus_stats(corpus->corpus)));
  });
}

void msa_corpus_free(msa_corpus* corpus) { delete corpus; }

void msa_train_opts_default(msa_train_opts* opts) {
  if (opts == nullptr) return;
  opts->model = "mult";
  opts->modalities = "tva";
  opts->fusion = "concat";
  opts->epochs = 150;
  opts->batch = 8;
  opts->lr = 0.05;
  opts->dropout = 0.1;
  opts->d_k = 8;
  opts->hidden = 16;
  opts->seed = 1;
}

int msa_model_train(const msa_corpus* corpus, const msa_train_opts* opts, msa_model** out,
                    char** loss_history_json) {
  return guarded([&] {
    require(corpus != nullptr && opts != nullptr && out != nullptr,
            "msa_model_train: null argument");
    require(opts->model != nullptr && opts->modalities != nullptr && opts->fusion != nullptr,
            "msa_model_train: null string option");
    require(opts->epochs >= 1, "msa_model_train: epochs must be >= 1");
    require(opts->batch >= 1, "msa_model_train: batch must be >= 1");
    require(opts->lr > 0.0, "msa_model_train: lr must be > 0");
    require(opts->d_k >= 1 && opts->hidden >= 1, "msa_model_train: d_k/hidden must be >= 1");

    msa::train::TrainConfig cfg;
    cfg.epochs = static_cast<std::size_t>(opts->epochs);
    cfg.batch = static_cast<std::size_t>(opts->batch);
    cfg.lr = opts->lr;
    cfg.seed = opts->seed;
    cfg.model.kind = msa::fusion::kind_from_string(opts->model);
    cfg.model.mask = msa::fusion::mask_from_string(opts->modalities);
    cfg.model.fusion = msa::fusion::fusion_from_string(opts->fusion);
    cfg.model.dims = corpus->corpus.dims;
    cfg.model.d_k = static_cast<std::size_t>(opts->d_k);
    cfg.model.hidden = static_cast<std::size_t>(opts->hidden);
    cfg.model.head_hidden = static_cast<std::size_t>(opts->hidden);
    cfg.model.dropout = opts->dropout;

    msa::train::TrainResult res = msa::train::train(corpus->corpus, cfg);
    if (loss_history_json != nullptr) {
      nlohmann::json arr = nlohmann::json::array();
      for (double v : res.loss_history) arr.push_back(v);
      *loss_history_json = dup_string(arr.dump());
    }
    *out = new msa_model{std::move(res.model)};
  });
}

int msa_model_save(const msa_model* model, const char* path) {
  return guarded([&] {
    require(model != nullptr && path != nullptr, "msa_model_save: null argument");
    msa::fusion::save_model(model->model, path);
  });
}

int msa_model_load(const char* path, msa_model** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "msa_model_load: null argument");
    *out = new msa_model{msa::fusion::load_model(path)};
  });
}

int msa_model_evaluate(const msa_model* model, const msa_corpus* corpus, const char* split,
                       const char* label, char** metrics_json) {
  return guarded([&] {
    require(model != nullptr && corpus != nullptr && split != nullptr && metrics_json != nullptr,
            "msa_model_evaluate: null argument");
    const msa::train::MetricsReport r =
        msa::train::evaluate(model->model, corpus->corpus,
                             msa::seq::split_from_string(split),
                             label == nullptr ? "" : label);
    *metrics_json = dup_string(msa::train::metrics_to_json(r));
  });
}

void msa_model_free(msa_model* model) { delete model; }

int msa_report_render(const char* const* metrics_jsons, int n, char** table_out) {
  return guarded([&] {
    require(metrics_jsons != nullptr && table_out != nullptr && n >= 1,
            "msa_report_render: need at least one report");
    std::vector<msa::train::MetricsReport> reports;
    for (int i = 0; i < n; ++i) {
      require(metrics_jsons[i] != nullptr, "msa_report_render: null report entry");
      reports.push_back(msa::train::metrics_from_json(metrics_jsons[i],
                                                      "report " + std::to_string(i)));
    }
    *table_out = dup_string(msa::train::render_report(reports));
  });
}

}  // extern "C"
