// countvqa: build counting benchmarks, query models, score them, and emit
// consistency training data.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 data error,
// 3 transport error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "countvqa/countvqa.hpp"
#include "countvqa/http_adapter.hpp"

namespace fs = std::filesystem;
using namespace countvqa;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitTransport = 3;

std::string file_sha256(const fs::path& p) { return sha256_hex(read_file(p)); }

// ---------------------------------------------------------------------------

struct BuildDatasetArgs {
  std::string annotations;
  int k = 50;
  std::uint64_t seed = 0;
  std::string cap_semantics = "prose";
  bool no_sample = false;
  std::string out_dir;
  std::string dump_instances;
};

int build_dataset(const BuildDatasetArgs& a) {
  const auto ann = load_annotations(a.annotations);
  const auto all = build_count_dataset(ann);
  if (!a.dump_instances.empty()) write_instances(a.dump_instances, all);

  std::size_t singles = 0;
  for (const auto& ci : all) singles += ci.count == 1 ? 1 : 0;

  json manifest{{"command", "build-dataset"},
                {"annotations", a.annotations},
                {"annotations_sha256", file_sha256(a.annotations)},
                {"images", ann.images.size()},
                {"annotations_count", ann.annotations.size()},
                {"categories", ann.categories.size()},
                {"instances_before_sampling", all.size()},
                {"fraction_count_one_before_sampling",
                 all.empty() ? 0.0 : static_cast<double>(singles) / static_cast<double>(all.size())}};

  std::vector<CountInstance> out;
  if (a.no_sample) {
    out = all;
    manifest["sampling"] = nullptr;
    manifest["output_size"] = out.size();
  } else {
    SamplerConfig cfg{a.k, a.seed, cap_semantics_from_string(a.cap_semantics)};
    auto r = double_k_uniform_sample(all, cfg);
    manifest["sampling"] = r.manifest.to_json();
    manifest["output_size"] = r.instances.size();
    out = std::move(r.instances);
  }
  const fs::path dir(a.out_dir);
  write_instances(dir / "dataset.jsonl", out);
  write_json_atomic(dir / "dataset.manifest.json", manifest);
  std::cerr << "build-dataset: " << all.size() << " instances, " << out.size() << " kept -> "
            << (dir / "dataset.jsonl").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct GenQuestionsArgs {
  std::string dataset;
  std::vector<std::string> families{"primal"};
  std::uint64_t seed = 0;
  int max_pairs = 3;
  std::string primal_responses;
  std::string out;
};

PriorAnswers load_prior_answers(const std::vector<CountInstance>& d, const fs::path& responses,
                                std::vector<CountInstance>& usable) {
  std::unordered_map<std::string, std::string> raw;
  for (const auto& r : read_responses(responses)) raw[r.question_id] = r.raw_text;
  PriorAnswers prior;
  std::size_t skipped = 0;
  for (const auto& ci : d) {
    const auto id = primal_question_id(ci);
    auto it = raw.find(id);
    std::optional<int> n;
    if (it != raw.end()) n = parse_number(it->second);
    if (!n || *n < 1) {
      ++skipped;
      continue;
    }
    prior[id] = *n;
    usable.push_back(ci);
  }
  if (skipped > 0) {
    std::cerr << "gen-questions: " << skipped
              << " instance(s) have no usable primal answer (missing, unparseable or < 1); no binary_II "
                 "question is generated for them\n";
  }
  return prior;
}

int gen_questions(const GenQuestionsArgs& a) {
  const auto d = read_instances(a.dataset);
  std::vector<QuestionRecord> out;
  const auto append = [&](std::vector<QuestionRecord> qs) {
    out.insert(out.end(), std::make_move_iterator(qs.begin()), std::make_move_iterator(qs.end()));
  };
  for (const auto& name : a.families) {
    const Family f = family_from_string(name);
    switch (f) {
      case Family::primal: append(gen_primal(d)); break;
      case Family::binary_I: append(gen_binary(d, BinarySetting::I, nullptr, a.seed)); break;
      case Family::binary_III: append(gen_binary(d, BinarySetting::III, nullptr, a.seed)); break;
      case Family::binary_II: {
        if (a.primal_responses.empty()) {
          throw ConfigError("binary_II needs --primal-responses (responses to the primal questions)");
        }
        std::vector<CountInstance> usable;
        const auto prior = load_prior_answers(d, a.primal_responses, usable);
        append(gen_binary(usable, BinarySetting::II, &prior, a.seed));
        break;
      }
      case Family::compare_I: append(gen_compare(d, CompareStyle::I, {a.max_pairs}, a.seed)); break;
      case Family::compare_II: append(gen_compare(d, CompareStyle::II, {a.max_pairs}, a.seed)); break;
      default: throw ConfigError("family " + name + " is produced by gen-train-data");
    }
  }
  write_questions(a.out, out);
  write_json_atomic(fs::path(a.out).string() + ".manifest.json",
                    json{{"command", "gen-questions"},
                         {"dataset", a.dataset},
                         {"dataset_sha256", file_sha256(a.dataset)},
                         {"families", a.families},
                         {"seed", a.seed},
                         {"max_pairs_per_image", a.max_pairs},
                         {"primal_responses", a.primal_responses},
                         {"generator_name", kGeneratorName},
                         {"count", out.size()}});
  std::cerr << "gen-questions: " << out.size() << " questions -> " << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct RunEvalArgs {
  std::string questions;
  std::string adapter = "oracle";
  std::uint64_t seed = 0;
  std::string replay_log;
  std::string endpoint;
  std::string out_dir;
  int workers = 4;
  std::size_t max_queries = 0;
};

int run_eval_cmd(const RunEvalArgs& a) {
  const auto questions = read_questions(a.questions);
  std::unique_ptr<Adapter> adapter;
  json adapter_cfg{{"name", a.adapter}};
  if (a.adapter == "oracle") {
    adapter = std::make_unique<OracleAdapter>();
  } else if (a.adapter == "random") {
    adapter = std::make_unique<RandomAdapter>(a.seed);
    adapter_cfg["seed"] = a.seed;
  } else if (a.adapter == "replay") {
    if (a.replay_log.empty()) throw ConfigError("--adapter replay needs --replay-log");
    adapter = std::make_unique<ReplayAdapter>(a.replay_log);
    adapter_cfg["replay_log"] = a.replay_log;
  } else if (a.adapter == "http") {
    if (a.endpoint.empty()) throw ConfigError("--adapter http needs --endpoint <config.json>");
    const auto cfg_json = parse_json_text(read_file(a.endpoint), a.endpoint);
    adapter = std::make_unique<HttpAdapter>(ModelEndpointConfig::from_json(cfg_json));
    adapter_cfg["endpoint"] = cfg_json;
  } else {
    throw ConfigError("unknown adapter " + a.adapter + " (oracle|random|replay|http)");
  }

  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  RunOptions opts;
  opts.workers = a.workers;
  if (a.max_queries > 0) opts.max_queries = a.max_queries;
  opts.progress = [](std::size_t done, std::size_t total) {
    if (done % 500 == 0 || done == total) std::cerr << "run-eval: " << done << "/" << total << "\n";
  };
  write_json_atomic(dir / "run.manifest.json",
                    json{{"command", "run-eval"},
                         {"questions", a.questions},
                         {"questions_sha256", file_sha256(a.questions)},
                         {"adapter", adapter_cfg},
                         {"workers", a.workers},
                         {"responses", (dir / "responses.jsonl").string()},
                         {"run_log", (dir / "run_log.jsonl").string()}});
  const auto s = run_eval(questions, *adapter, dir / "responses.jsonl", dir / "run_log.jsonl", opts);
  std::cerr << "run-eval: " << s.total << " questions, " << s.resumed << " resumed, " << s.queried
            << " queried" << (s.complete ? "" : " (incomplete)") << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct AnalyzeArgs {
  std::string questions;
  std::string responses;
  std::string out_dir;
  std::string model = "model";
};

int analyze_cmd(const AnalyzeArgs& a) {
  const auto questions = read_questions(a.questions);
  const auto responses = read_responses(a.responses);
  const auto result = analyze(questions, responses);
  const fs::path dir(a.out_dir);
  write_json_atomic(dir / "eval_report.json", to_json(result));
  write_json_atomic(dir / "consistency_report.json", to_json(result.consistency));
  write_text_atomic(dir / "families.csv", families_csv(a.model, result));
  if (auto it = result.by_family.find(Family::primal); it != result.by_family.end()) {
    write_text_atomic(dir / "counting.csv", counting_csv(a.model, it->second));
  }
  const auto md = to_markdown(a.model, result);
  write_text_atomic(dir / "report.md", md);
  std::cout << md;
  return 0;
}

// ---------------------------------------------------------------------------

struct GenTrainArgs {
  std::string annotations;
  std::string method = "direct";
  std::uint64_t seed = 0;
  std::size_t target_count = kDefaultComparisonTarget;
  std::string holdout;
  std::string out;
};

std::set<std::string> load_holdout(const fs::path& p) {
  std::set<std::string> out;
  std::ifstream in(p);
  if (!in) throw DataError("cannot open " + p.string());
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) out.insert(line);
  }
  return out;
}

int gen_train(const GenTrainArgs& a) {
  const auto s = build_count_dataset(load_annotations(a.annotations));
  std::vector<TrainSample> samples;
  json counts = json::object();
  if (a.method == "direct") {
    samples = gen_direct(s);
  } else if (a.method == "cons_I") {
    samples = gen_cons_I(s, a.seed);
  } else if (a.method == "cons_II" || a.method == "cons_I_II") {
    auto r = a.method == "cons_II" ? gen_cons_II(s, a.target_count, a.seed) : gen_cons_I_II(s, a.seed, a.target_count);
    if (r.short_of_target) {
      std::cerr << "gen-train-data: warning: only " << r.available << " category pairs available, target was "
                << a.target_count << "\n";
    }
    samples = std::move(r.samples);
  } else {
    throw ConfigError("unknown method " + a.method + " (direct|cons_I|cons_II|cons_I_II)");
  }
  for (const auto& t : samples) {
    auto key = std::string(to_string(t.method));
    counts[key] = counts.value(key, 0) + 1;
  }
  if (!a.holdout.empty()) check_no_leakage(samples, load_holdout(a.holdout));
  write_samples(a.out, samples);
  write_json_atomic(fs::path(a.out).string() + ".manifest.json",
                    json{{"method", a.method},
                         {"seed", a.seed},
                         {"count", samples.size()},
                         {"counts_by_method", counts},
                         {"target_count", a.target_count},
                         {"source", a.annotations},
                         {"source_hash", file_sha256(a.annotations)},
                         {"instances", s.size()},
                         {"generator_name", kGeneratorName}});
  std::cerr << "gen-train-data: " << samples.size() << " samples -> " << a.out << "\n";
  return 0;
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const TransportError& e) {
    std::cerr << "transport error: " << e.what() << "\n";
    return kExitTransport;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Object-counting VQA benchmark and consistency analysis"};
  app.set_config("--config", "", "Read flags from a TOML/INI file; command-line flags win");
  app.require_subcommand(1);

  BuildDatasetArgs bd;
  auto* build = app.add_subcommand("build-dataset", "COCO annotations -> balanced counting dataset");
  build->add_option("--annotations", bd.annotations, "COCO instances JSON")->required()->check(CLI::ExistingFile);
  build->add_option("--k", bd.k, "Per (category, count) cap")->check(CLI::PositiveNumber);
  build->add_option("--seed", bd.seed, "Sampling seed");
  build->add_option("--cap-semantics", bd.cap_semantics, "prose (<= k) or pseudocode (<= k+1)")
      ->check(CLI::IsMember({"prose", "pseudocode"}));
  build->add_flag("--no-sample", bd.no_sample, "Keep every instance");
  build->add_option("--dump-instances", bd.dump_instances, "Also write all pre-sampling instances here");
  build->add_option("--out-dir", bd.out_dir, "Output directory")->required();

  GenQuestionsArgs gq;
  auto* genq = app.add_subcommand("gen-questions", "Dataset -> question records");
  genq->add_option("--dataset", gq.dataset, "dataset.jsonl")->required()->check(CLI::ExistingFile);
  genq->add_option("--families", gq.families,
                   "primal, binary_I, binary_II, binary_III, compare_I, compare_II")
      ->delimiter(',');
  genq->add_option("--seed", gq.seed, "Generation seed");
  genq->add_option("--max-pairs", gq.max_pairs, "Comparison pairs per image")->check(CLI::PositiveNumber);
  genq->add_option("--primal-responses", gq.primal_responses, "Responses to primal questions (binary_II)")
      ->check(CLI::ExistingFile);
  genq->add_option("--out", gq.out, "Output questions JSONL")->required();

  RunEvalArgs re;
  auto* run = app.add_subcommand("run-eval", "Ask an adapter every question (resumable)");
  run->add_option("--questions", re.questions, "questions JSONL")->required()->check(CLI::ExistingFile);
  run->add_option("--adapter", re.adapter, "oracle | random | replay | http")
      ->check(CLI::IsMember({"oracle", "random", "replay", "http"}));
  run->add_option("--seed", re.seed, "Seed for the random adapter");
  run->add_option("--replay-log", re.replay_log, "Run log to replay")->check(CLI::ExistingFile);
  run->add_option("--endpoint", re.endpoint, "Endpoint config JSON for the http adapter")->check(CLI::ExistingFile);
  run->add_option("--workers", re.workers, "Concurrent requests")->check(CLI::PositiveNumber);
  run->add_option("--max-queries", re.max_queries, "Stop after this many new queries (0: no limit)");
  run->add_option("--out-dir", re.out_dir, "Run directory")->required();

  AnalyzeArgs an;
  auto* ana = app.add_subcommand("analyze", "Score responses and compute consistency");
  ana->add_option("--questions", an.questions, "questions JSONL")->required()->check(CLI::ExistingFile);
  ana->add_option("--responses", an.responses, "responses JSONL")->required()->check(CLI::ExistingFile);
  ana->add_option("--model", an.model, "Model name for report rows");
  ana->add_option("--out-dir", an.out_dir, "Report directory")->required();

  GenTrainArgs gt;
  auto* train = app.add_subcommand("gen-train-data", "Training annotations -> finetuning JSONL");
  train->add_option("--annotations", gt.annotations, "COCO instances JSON (training split)")
      ->required()
      ->check(CLI::ExistingFile);
  train->add_option("--method", gt.method, "direct | cons_I | cons_II | cons_I_II")
      ->check(CLI::IsMember({"direct", "cons_I", "cons_II", "cons_I_II"}));
  train->add_option("--seed", gt.seed, "Generation seed");
  train->add_option("--target-count", gt.target_count, "Comparison samples to draw");
  train->add_option("--holdout", gt.holdout, "File of held-out image refs, one per line")->check(CLI::ExistingFile);
  train->add_option("--out", gt.out, "Output JSONL")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  if (*build) return guarded([&] { return build_dataset(bd); });
  if (*genq) return guarded([&] { return gen_questions(gq); });
  if (*run) return guarded([&] { return run_eval_cmd(re); });
  if (*ana) return guarded([&] { return analyze_cmd(an); });
  if (*train) return guarded([&] { return gen_train(gt); });
  return kExitUsage;
}
