// Copyright 2026 The factree Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/* C interface to the factorization-tree recommender.
 *
 * Every function that can fail returns a fact_status. On failure the message
 * is available from fact_last_error() on the calling thread until the next
 * call on that thread. Strings returned through `char**` are owned by the
 * caller and released with fact_string_free(). Handles are released with the
 * matching *_free function; passing NULL to any *_free is a no-op. */
#ifndef FACTREE_FACTREE_H_
#define FACTREE_FACTREE_H_

#ifdef __cplusplus
extern "C" {
#endif

#if defined(__GNUC__)
#define FACT_API __attribute__((visibility("default")))
#else
#define FACT_API
#endif

typedef enum fact_status {
  FACT_OK = 0,
  FACT_ERR_PARSE = 1,
  FACT_ERR_VALIDATION = 2,
  FACT_ERR_EMPTY_DATASET = 3,
  FACT_ERR_DIVERGENCE = 4,
  FACT_ERR_STATE = 5,
  FACT_ERR_NOT_FOUND = 6,
  FACT_ERR_VERSION = 7,
  FACT_ERR_CHECKSUM = 8,
  FACT_ERR_SCHEMA = 9,
  FACT_ERR_IO = 10,
  FACT_ERR_INTERNAL = 11
} fact_status;

typedef struct fact_dataset fact_dataset;
typedef struct fact_config fact_config;
typedef struct fact_model fact_model;
typedef struct fact_session fact_session;
typedef struct fact_server fact_server;

FACT_API const char* fact_version(void);
FACT_API const char* fact_last_error(void);
/* Short code name of a status, e.g. "checksum_error". */
FACT_API const char* fact_status_name(fact_status status);
FACT_API void fact_string_free(char* s);
/* level: "error", "warn", "info" or "debug". */
FACT_API fact_status fact_set_log_level(const char* level);

/* Datasets. options_json may be NULL; keys: "scale": [min, max],
 * "vocabulary": path to a newline-separated feature list. */
FACT_API fact_status fact_dataset_load(const char* path,
                                       const char* options_json,
                                       fact_dataset** out);
/* thresholds_json keys: min_feature_freq, min_mentions_per_review,
 * min_reviews_per_user, min_reviews_per_item. */
FACT_API fact_status fact_dataset_filter(const fact_dataset* ds,
                                         const char* thresholds_json,
                                         fact_dataset** out);
FACT_API fact_status fact_dataset_truncate_features(const fact_dataset* ds,
                                                    int count,
                                                    fact_dataset** out);
FACT_API fact_status fact_dataset_save(const fact_dataset* ds,
                                       const char* path);
FACT_API fact_status fact_dataset_summary(const fact_dataset* ds,
                                          char** json_out);
/* Planted-cluster synthetic data; spec_json may be NULL for defaults. The
 * returned dataset carries cluster labels in its summary. */
FACT_API fact_status fact_synth(const char* spec_json, fact_dataset** out);
FACT_API void fact_dataset_free(fact_dataset* ds);

/* Training configuration. */
FACT_API fact_status fact_config_new(fact_config** out);
/* .toml or .json by extension. */
FACT_API fact_status fact_config_load(const char* path, fact_config** out);
/* "key=value" or "hp.key=value"; value parsed as JSON, else a string. */
FACT_API fact_status fact_config_set(fact_config* cfg, const char* assignment);
FACT_API fact_status fact_config_to_json(const fact_config* cfg,
                                         char** json_out);
FACT_API void fact_config_free(fact_config* cfg);

/* Models. */
FACT_API fact_status fact_train(const fact_dataset* ds, const fact_config* cfg,
                                fact_model** out);
FACT_API fact_status fact_model_load(const char* path, fact_model** out);
FACT_API fact_status fact_model_save(const fact_model* model,
                                     const char* path);
/* Sizes, tree shapes, convergence report, config and migration note. */
FACT_API fact_status fact_model_info(const fact_model* model, char** json_out);
/* Wall-clock seconds per training phase (empty for loaded models). */
FACT_API fact_status fact_model_timings(const fact_model* model,
                                        char** json_out);
FACT_API void fact_model_free(fact_model* model);

FACT_API fact_status fact_predict(const fact_model* model, const char* user,
                                  const char* item, double* out);
FACT_API fact_status fact_recommend(const fact_model* model, const char* user,
                                    int k, int exclude_seen, char** json_out);
/* Recommendations for a raw feature profile given as {"feature": value}. */
FACT_API fact_status fact_recommend_profile(const fact_model* model,
                                            const char* profile_json, int k,
                                            char** json_out);
/* templates_path may be NULL for the built-in sentences. */
FACT_API fact_status fact_explain(const fact_model* model, const char* user,
                                  const char* item, const char* templates_path,
                                  char** json_out);

/* Cold-start interview over the user tree. */
FACT_API fact_status fact_session_start(const fact_model* model,
                                        fact_session** out);
FACT_API fact_status fact_session_state(const fact_session* session,
                                        char** json_out);
/* answer: "like", "dislike" or "unknown". */
FACT_API fact_status fact_session_answer(fact_session* session,
                                         const char* answer);
FACT_API fact_status fact_session_recommend(const fact_session* session, int k,
                                            char** json_out);
FACT_API void fact_session_free(fact_session* session);

/* Evaluation. options_json may be NULL; keys: "ks": [..], "gain":
 * "rating"|"binary". */
FACT_API fact_status fact_evaluate(const fact_model* model,
                                   const fact_dataset* test,
                                   const char* options_json, char** json_out);
/* Extra keys: "method" (fact, most-popular, flat-mf, bpr-mf), "folds",
 * "max_folds". */
FACT_API fact_status fact_cross_validate(const fact_dataset* ds,
                                         const fact_config* cfg,
                                         const char* options_json,
                                         char** json_out);
/* Keys: "k_values", "test_fraction", "cutoff", "gain", "seed". */
FACT_API fact_status fact_cold_start(const fact_dataset* ds,
                                     const fact_config* cfg,
                                     const char* options_json,
                                     char** json_out);
/* Keys: "axis" (depth, latent_dim, phi, n_features, parent_factors),
 * "values", "folds", "max_folds", "ks", "gain". csv_out may be NULL. */
FACT_API fact_status fact_sweep(const fact_dataset* ds, const fact_config* cfg,
                                const char* options_json, char** json_out,
                                char** csv_out);

/* HTTP service. options_json may be NULL; keys: "host", "port" (0 picks a
 * free port), "ui_dir", "ttl_seconds", "capacity", "templates", "threads",
 * "cors_origin". The model is shared; it may be freed after start. */
FACT_API fact_status fact_server_start(const fact_model* model,
                                       const char* options_json,
                                       fact_server** out);
FACT_API int fact_server_port(const fact_server* server);
FACT_API fact_status fact_server_stop(fact_server* server);
FACT_API void fact_server_free(fact_server* server);

#ifdef __cplusplus
}
#endif

#endif /* FACTREE_FACTREE_H_ */
