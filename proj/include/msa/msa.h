/* C API for the multimodal sentiment-analysis library.
 *
 * All functions return MSA_OK (0) on success or a nonzero error code; the
 * message for the most recent failure on the calling thread is available
 * via msa_last_error(). Objects are opaque handles released with the
 * matching *_free function; strings returned through char** out-params are
 * released with msa_string_free().
 */
#ifndef MSA_H
#define MSA_H

#ifdef __cplusplus
extern "C" {
#endif

#define MSA_OK 0
#define MSA_ERR_USAGE 2      /* invalid arguments / flags */
#define MSA_ERR_VALIDATION 3 /* parse or invariant failure */
#define MSA_ERR_NUMERIC 4    /* non-finite numeric result */
#define MSA_ERR_IO 5         /* file system failure */

typedef struct msa_corpus msa_corpus;
typedef struct msa_model msa_model;

/* Message for the most recent error on this thread (empty string if none). */
const char* msa_last_error(void);

void msa_string_free(char* s);

/* ---- corpus ---- */

typedef struct msa_synth_opts {
  const char* mode; /* "unimodal" | "crossmodal" */
  int segments;
  int text_dim, audio_dim, video_dim;
  double noise;
  double amplitude; /* planted signal strength */
  int words_min, words_max;
} msa_synth_opts;

void msa_synth_opts_default(msa_synth_opts* opts);

int msa_corpus_synth(const msa_synth_opts* opts, unsigned long long seed,
                     msa_corpus** out);
int msa_corpus_load(const char* path, msa_corpus** out);
int msa_corpus_save(const msa_corpus* corpus, const char* path);
/* collapse: "mean" | "max". */
int msa_corpus_align(const msa_corpus* corpus, const char* collapse, msa_corpus** out);
/* 1 if every segment's three modalities share one row count, else 0. */
int msa_corpus_is_aligned(const msa_corpus* corpus);
int msa_corpus_stats_json(const msa_corpus* corpus, char** json_out);
void msa_corpus_free(msa_corpus* corpus);

/* ---- models ---- */

typedef struct msa_train_opts {
  const char* model;      /* "mult" | "lf_lstm" */
  const char* modalities; /* subset of "tav", e.g. "tva" */
  const char* fusion;     /* "concat" | "sum" */
  int epochs, batch;
  double lr, dropout;
  int d_k, hidden;
  unsigned long long seed;
} msa_train_opts;

void msa_train_opts_default(msa_train_opts* opts);

/* Trains on the corpus' train split; corpus must be aligned. On success
 * *loss_history_json (optional, may be NULL) receives a JSON array of
 * per-epoch mean losses. */
int msa_model_train(const msa_corpus* corpus, const msa_train_opts* opts,
                    msa_model** out, char** loss_history_json);
int msa_model_save(const msa_model* model, const char* path);
int msa_model_load(const char* path, msa_model** out);
/* split: "train" | "valid" | "test"; label may be NULL for the default
 * label (e.g. "TVA-Mult"). */
int msa_model_evaluate(const msa_model* model, const msa_corpus* corpus,
                       const char* split, const char* label, char** metrics_json);
void msa_model_free(msa_model* model);

/* ---- reporting ---- */

/* Renders the fixed-width comparison table (plus TVA-vs-unimodal delta
 * footer) from metric report JSON documents. */
int msa_report_render(const char* const* metrics_jsons, int n, char** table_out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* MSA_H */
