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

// Command-line front end. Talks to the library only through the C API.
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "factree/factree.h"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Thrown on a failed C call; carries the exit code.
struct Failure {
  int exit_code;
  std::string message;
};

int exit_code_for(fact_status status) {
  switch (status) {
    case FACT_OK:
      return 0;
    case FACT_ERR_PARSE:
    case FACT_ERR_VALIDATION:
    case FACT_ERR_NOT_FOUND:
    case FACT_ERR_STATE:
      return 1;
    default:
      return 2;
  }
}

void check(fact_status status) {
  if (status != FACT_OK) {
    throw Failure{exit_code_for(status), std::string(fact_status_name(status)) +
                                             ": " + fact_last_error()};
  }
}

void usage_error(const std::string& message) { throw Failure{1, message}; }

// Owns a string returned by the C API.
std::string take(char* s) {
  std::string out = s == nullptr ? std::string() : std::string(s);
  fact_string_free(s);
  return out;
}

json take_json(char* s) { return json::parse(take(s)); }

template <typename T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(p); }
  T** out() { return &p; }
  T* get() const { return p; }
};

using Dataset = Handle<fact_dataset, fact_dataset_free>;
using Config = Handle<fact_config, fact_config_free>;
using Model = Handle<fact_model, fact_model_free>;
using Session = Handle<fact_session, fact_session_free>;
using Server = Handle<fact_server, fact_server_free>;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<int> depth;
  std::optional<int> dim;
  std::vector<std::string> overrides;
  bool json = false;
};

void add_config_flags(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "Training config (.toml or .json)");
  cmd->add_option("--seed", c.seed, "Random seed");
  cmd->add_option("--threads", c.threads, "Worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--depth", c.depth, "Maximum tree depth (node levels)");
  cmd->add_option("--dim", c.dim, "Latent dimension");
  cmd->add_option("--set", c.overrides, "Config override key=value (repeatable)");
}

void load_config(const Common& c, Config& cfg) {
  if (c.config.empty()) {
    check(fact_config_new(cfg.out()));
  } else {
    check(fact_config_load(c.config.c_str(), cfg.out()));
  }
  for (const auto& o : c.overrides) check(fact_config_set(cfg.get(), o.c_str()));
  if (c.seed) {
    check(fact_config_set(cfg.get(), ("hp.seed=" + std::to_string(*c.seed)).c_str()));
  }
  if (c.threads) {
    check(fact_config_set(cfg.get(), ("threads=" + std::to_string(*c.threads)).c_str()));
  }
  if (c.depth) {
    check(fact_config_set(cfg.get(), ("depth=" + std::to_string(*c.depth)).c_str()));
  }
  if (c.dim) {
    check(fact_config_set(cfg.get(), ("hp.dim=" + std::to_string(*c.dim)).c_str()));
  }
}

void load_data(const std::string& path, const std::optional<std::string>& options,
               Dataset& ds) {
  check(fact_dataset_load(path.c_str(), options ? options->c_str() : nullptr,
                          ds.out()));
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Failure{2, "cannot write " + path.string()};
}

std::string sibling(const fs::path& model_path, const std::string& suffix) {
  fs::path stem = model_path;
  stem.replace_extension();
  return stem.string() + suffix;
}

std::string csv_number(double v) {
  std::ostringstream out;
  out.precision(10);
  out << v;
  return out.str();
}

void print_summary(const json& s, bool as_json) {
  if (as_json) {
    std::cout << s.dump() << "\n";
    return;
  }
  std::cout << "users " << s["users"] << "\nitems " << s["items"] << "\nfeatures "
            << s["features"] << "\nreviews " << s["reviews"] << "\nmentions "
            << s["mentions"] << "\n";
}

void print_recommendations(const json& r, bool as_json) {
  if (as_json) {
    std::cout << r.dump() << "\n";
    return;
  }
  int rank = 1;
  for (const auto& item : r["items"]) {
    std::cout << rank++ << "\t" << item["item"].get<std::string>() << "\t"
              << csv_number(item["score"].get<double>()) << "\t"
              << item["explanation"]["text"].get<std::string>() << "\n";
  }
}

int run(int argc, char** argv) {
  CLI::App app{"Factorization-tree recommender"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every command");

  Common common;
  std::string data;
  std::string model_path;
  std::string out;

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Parse, filter and save a review file");
  int min_feature_freq = 0, min_mentions = 0, min_user_reviews = 0,
      min_item_reviews = 0;
  std::optional<int> keep_features;
  std::optional<std::string> vocab;
  std::vector<double> scale;
  ingest->add_option("--data", data, "Input JSON-lines reviews")->required();
  ingest->add_option("--out", out, "Filtered JSON-lines output");
  ingest->add_option("--min-feature-freq", min_feature_freq);
  ingest->add_option("--min-mentions", min_mentions, "Per review");
  ingest->add_option("--min-user-reviews", min_user_reviews);
  ingest->add_option("--min-item-reviews", min_item_reviews);
  ingest->add_option("--features", keep_features, "Keep the N most mentioned features");
  ingest->add_option("--vocab", vocab, "Fixed feature vocabulary file");
  ingest->add_option("--scale", scale, "Rating scale min,max")->delimiter(',')->expected(2);
  ingest->add_flag("--json", common.json);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate planted-cluster synthetic data");
  std::string spec_path;
  std::vector<std::string> spec_overrides;
  synth->add_option("--out", out, "JSON-lines output")->required();
  synth->add_option("--spec", spec_path, "Synthetic spec (JSON)");
  synth->add_option("--set", spec_overrides, "Spec override key=value");
  synth->add_option("--seed", common.seed);
  std::string labels;
  synth->add_option("--labels", labels, "Write cluster labels (JSON)");
  synth->add_flag("--json", common.json);

  // train
  auto* train = app.add_subcommand("train", "Train a model");
  train->add_option("--data", data)->required();
  train->add_option("--out", out, "Model output path")->required();
  add_config_flags(train, common);
  train->add_flag("--json", common.json);

  // evaluate
  auto* evaluate = app.add_subcommand(
      "evaluate", "Score a model on held-out data, or cross-validate a method");
  std::vector<int> ks{10, 20, 50, 100};
  std::string gain = "rating";
  std::string method = "fact";
  int folds = 5;
  std::optional<int> max_folds;
  bool cold_start = false;
  evaluate->add_option("--model", model_path, "Trained model (held-out mode)");
  evaluate->add_option("--data", data)->required();
  evaluate->add_option("--k", ks, "Cutoffs, e.g. 10,50")->delimiter(',');
  evaluate->add_option("--gain", gain)->check(CLI::IsMember({"rating", "binary"}));
  evaluate->add_option("--method", method, "fact, most-popular, flat-mf, bpr-mf");
  evaluate->add_option("--folds", folds);
  evaluate->add_option("--max-folds", max_folds);
  evaluate->add_flag("--cold-start", cold_start, "Cold-start NDCG@50 for k=0..5");
  evaluate->add_option("--out", out, "Write the report here instead of stdout");
  add_config_flags(evaluate, common);
  evaluate->add_flag("--json", common.json);

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Vary one setting and cross-validate");
  std::string axis;
  std::vector<double> values;
  sweep->add_option("--data", data)->required();
  sweep->add_option("--axis", axis, "depth, latent_dim, phi, n_features, parent_factors")
      ->required();
  sweep->add_option("--values", values)->delimiter(',')->required();
  sweep->add_option("--k", ks)->delimiter(',');
  sweep->add_option("--gain", gain)->check(CLI::IsMember({"rating", "binary"}));
  sweep->add_option("--folds", folds);
  sweep->add_option("--max-folds", max_folds);
  sweep->add_option("--out", out, "CSV output path");
  add_config_flags(sweep, common);
  sweep->add_flag("--json", common.json);

  // recommend
  auto* recommend = app.add_subcommand("recommend", "Top-k items for a user");
  std::string user, item, profile, templates;
  int k = 10;
  bool include_seen = false;
  recommend->add_option("--model", model_path)->required();
  auto* user_opt = recommend->add_option("--user", user);
  auto* profile_opt =
      recommend->add_option("--profile", profile, "Feature mention counts as JSON");
  user_opt->excludes(profile_opt);
  recommend->add_option("--k", k)->check(CLI::PositiveNumber);
  recommend->add_flag("--include-seen", include_seen);
  recommend->add_flag("--json", common.json);

  // explain
  auto* explain = app.add_subcommand("explain", "Explain one recommendation");
  explain->add_option("--model", model_path)->required();
  explain->add_option("--user", user)->required();
  explain->add_option("--item", item)->required();
  explain->add_option("--templates", templates, "Sentence templates (JSON)");
  explain->add_flag("--json", common.json);

  // interview
  auto* interview = app.add_subcommand("interview", "Answer questions, then get items");
  std::vector<std::string> answers;
  interview->add_option("--model", model_path)->required();
  interview->add_option("--answers", answers, "Scripted answers instead of stdin")
      ->delimiter(',');
  interview->add_option("--k", k)->check(CLI::PositiveNumber);
  interview->add_flag("--json", common.json);

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string ui_dir;
  int ttl = 1800;
  serve->add_option("--model", model_path)->required();
  serve->add_option("--host", host);
  serve->add_option("--port", port);
  serve->add_option("--ui", ui_dir, "Static UI directory served under /ui/");
  serve->add_option("--templates", templates);
  serve->add_option("--session-ttl", ttl, "Seconds");
  serve->add_option("--threads", common.threads)->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  const char* level = std::getenv("FACT_LOG");
  check(fact_set_log_level(level != nullptr && *level != '\0' ? level : "warn"));

  if (ingest->parsed()) {
    json options = json::object();
    if (!scale.empty()) options["scale"] = scale;
    if (vocab) options["vocabulary"] = *vocab;
    Dataset raw, filtered;
    load_data(data, options.dump(), raw);
    const json thresholds = {{"min_feature_freq", min_feature_freq},
                             {"min_mentions_per_review", min_mentions},
                             {"min_reviews_per_user", min_user_reviews},
                             {"min_reviews_per_item", min_item_reviews}};
    check(fact_dataset_filter(raw.get(), thresholds.dump().c_str(), filtered.out()));
    fact_dataset* result = filtered.get();
    Dataset truncated;
    if (keep_features) {
      check(fact_dataset_truncate_features(result, *keep_features, truncated.out()));
      result = truncated.get();
    }
    if (!out.empty()) check(fact_dataset_save(result, out.c_str()));
    char* s = nullptr;
    check(fact_dataset_summary(result, &s));
    print_summary(take_json(s), common.json);
    return 0;
  }

  if (synth->parsed()) {
    json spec = json::object();
    if (!spec_path.empty()) {
      std::ifstream in(spec_path);
      if (!in) usage_error("cannot read " + spec_path);
      try {
        spec = json::parse(in);
      } catch (const json::exception& e) {
        usage_error(spec_path + ": " + e.what());
      }
    }
    for (const auto& o : spec_overrides) {
      const auto eq = o.find('=');
      if (eq == std::string::npos) usage_error("override must be key=value: " + o);
      const std::string value = o.substr(eq + 1);
      spec[o.substr(0, eq)] = json::accept(value) ? json::parse(value) : json(value);
    }
    if (common.seed) spec["seed"] = *common.seed;
    Dataset ds;
    check(fact_synth(spec.dump().c_str(), ds.out()));
    check(fact_dataset_save(ds.get(), out.c_str()));
    char* s = nullptr;
    check(fact_dataset_summary(ds.get(), &s));
    json summary = take_json(s);
    if (!labels.empty()) {
      write_file(labels, json{{"user_cluster", summary["user_cluster"]},
                                  {"item_cluster", summary["item_cluster"]}}
                                 .dump() + "\n");
    }
    summary.erase("user_cluster");
    summary.erase("item_cluster");
    print_summary(summary, common.json);
    return 0;
  }

  if (train->parsed()) {
    Config cfg;
    load_config(common, cfg);
    Dataset ds;
    load_data(data, std::nullopt, ds);
    Model model;
    check(fact_train(ds.get(), cfg.get(), model.out()));
    check(fact_model_save(model.get(), out.c_str()));
    char* s = nullptr;
    check(fact_config_to_json(cfg.get(), &s));
    write_file(sibling(out, ".config.json"), take_json(s).dump(2) + "\n");
    check(fact_model_timings(model.get(), &s));
    write_file(sibling(out, ".timings.json"), take_json(s).dump(2) + "\n");
    check(fact_model_info(model.get(), &s));
    const json info = take_json(s);
    if (common.json) {
      std::cout << info.dump() << "\n";
    } else {
      std::cout << "model " << out << "\nuser tree levels "
                << info["user_tree"]["levels"] << " leaves "
                << info["user_tree"]["leaves"] << "\nitem tree levels "
                << info["item_tree"]["levels"] << " leaves "
                << info["item_tree"]["leaves"] << "\nobjective "
                << csv_number(info["report"]["objectives"].back().get<double>())
                << " (" << info["report"]["stop_reason"].get<std::string>()
                << ")\n";
    }
    return 0;
  }

  if (evaluate->parsed()) {
    Dataset ds;
    load_data(data, std::nullopt, ds);
    std::ostringstream report;
    if (cold_start) {
      Config cfg;
      load_config(common, cfg);
      char* s = nullptr;
      check(fact_cold_start(ds.get(), cfg.get(),
                            json{{"gain", gain}}.dump().c_str(), &s));
      const json r = take_json(s);
      if (common.json) {
        report << r.dump() << "\n";
      } else {
        report << "k,ndcg@" << r["cutoff"] << ",users,skipped\n";
        for (const auto& p : r["points"]) {
          report << p["k"] << ","
                 << (p["ndcg"].is_null() ? "" : csv_number(p["ndcg"].get<double>()))
                 << "," << p["users"] << "," << p["skipped"] << "\n";
        }
      }
    } else {
      json metrics;
      json full;
      const json options = {{"ks", ks}, {"gain", gain}};
      char* s = nullptr;
      if (!model_path.empty()) {
        Model model;
        check(fact_model_load(model_path.c_str(), model.out()));
        check(fact_evaluate(model.get(), ds.get(), options.dump().c_str(), &s));
        full = take_json(s);
        metrics = full["metrics"];
      } else {
        Config cfg;
        load_config(common, cfg);
        json cv = options;
        cv["method"] = method;
        cv["folds"] = folds;
        if (max_folds) cv["max_folds"] = *max_folds;
        check(fact_cross_validate(ds.get(), cfg.get(), cv.dump().c_str(), &s));
        full = take_json(s);
        for (const auto& [key, m] : full["metrics"].items()) metrics[key] = m["mean"];
      }
      if (common.json) {
        report << full.dump() << "\n";
      } else {
        for (std::size_t c = 0; c < ks.size(); ++c) {
          report << (c ? "," : "") << "ndcg@" << ks[c];
        }
        report << "\n";
        for (std::size_t c = 0; c < ks.size(); ++c) {
          report << (c ? "," : "")
                 << csv_number(metrics["ndcg@" + std::to_string(ks[c])].get<double>());
        }
        report << "\n";
      }
    }
    if (out.empty()) {
      std::cout << report.str();
    } else {
      write_file(out, report.str());
    }
    return 0;
  }

  if (sweep->parsed()) {
    Config cfg;
    load_config(common, cfg);
    Dataset ds;
    load_data(data, std::nullopt, ds);
    json options = {{"axis", axis}, {"values", values}, {"folds", folds},
                    {"ks", ks},     {"gain", gain}};
    if (max_folds) options["max_folds"] = *max_folds;
    char* j = nullptr;
    char* csv = nullptr;
    check(fact_sweep(ds.get(), cfg.get(), options.dump().c_str(), &j, &csv));
    const std::string json_text = take(j);
    const std::string csv_text = take(csv);
    if (!out.empty()) {
      write_file(out, csv_text);
      write_file(sibling(out, ".json"), json::parse(json_text).dump(2) + "\n");
    }
    std::cout << (common.json ? json_text + "\n" : csv_text);
    return 0;
  }

  Model model;
  check(fact_model_load(model_path.c_str(), model.out()));

  if (recommend->parsed()) {
    char* s = nullptr;
    if (!profile.empty()) {
      check(fact_recommend_profile(model.get(), profile.c_str(), k, &s));
    } else if (!user.empty()) {
      check(fact_recommend(model.get(), user.c_str(), k, include_seen ? 0 : 1, &s));
    } else {
      usage_error("recommend needs --user or --profile");
    }
    print_recommendations(take_json(s), common.json);
    return 0;
  }

  if (explain->parsed()) {
    char* s = nullptr;
    check(fact_explain(model.get(), user.c_str(), item.c_str(),
                       templates.empty() ? nullptr : templates.c_str(), &s));
    const json e = take_json(s);
    std::cout << (common.json ? e.dump() : e["text"].get<std::string>()) << "\n";
    return 0;
  }

  if (interview->parsed()) {
    Session session;
    check(fact_session_start(model.get(), session.out()));
    std::size_t next = 0;
    const bool scripted = !answers.empty();
    while (true) {
      char* s = nullptr;
      check(fact_session_state(session.get(), &s));
      const json state = take_json(s);
      if (state["status"] == "finished") break;
      std::string answer;
      if (scripted) {
        if (next == answers.size()) {
          usage_error("interview needs more answers than were given");
        }
        answer = answers[next++];
      } else {
        std::cerr << state["question"]["prompt"].get<std::string>()
                  << " [like/dislike/unknown] " << std::flush;
        if (!std::getline(std::cin, answer)) {
          usage_error("input ended before the interview finished");
        }
        if (answer == "l") answer = "like";
        if (answer == "d") answer = "dislike";
        if (answer == "u" || answer.empty()) answer = "unknown";
      }
      const fact_status status = fact_session_answer(session.get(), answer.c_str());
      if (status == FACT_ERR_VALIDATION && !scripted) {
        std::cerr << fact_last_error() << "\n";
        continue;
      }
      check(status);
    }
    char* s = nullptr;
    check(fact_session_recommend(session.get(), k, &s));
    json recs = take_json(s);
    if (common.json) {
      check(fact_session_state(session.get(), &s));
      std::cout << json{{"session", take_json(s)}, {"recommendations", recs}}.dump()
                << "\n";
    } else {
      print_recommendations(recs, false);
    }
    return 0;
  }

  if (serve->parsed()) {
    // Signals are taken synchronously by this thread; server threads
    // inherit the blocked mask.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    json options = {{"host", host}, {"port", port}, {"ttl_seconds", ttl}};
    if (!ui_dir.empty()) options["ui_dir"] = ui_dir;
    if (!templates.empty()) options["templates"] = templates;
    if (common.threads) options["threads"] = *common.threads;
    Server server;
    check(fact_server_start(model.get(), options.dump().c_str(), server.out()));
    std::cout << "listening on http://" << host << ":"
              << fact_server_port(server.get()) << std::endl;
    int received = 0;
    sigwait(&signals, &received);
    check(fact_server_stop(server.get()));
    return 0;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << "\n";
    return f.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
