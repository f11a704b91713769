#pragma once

// Resumable, concurrent evaluation runs.
//
// Every answer is appended to the run log as soon as it arrives. On restart
// the log is read back and answered questions are skipped. The responses
// file is rewritten atomically in question order at the end of each
// invocation, so an interrupted-then-resumed run ends with the same bytes as
// an uninterrupted one.

#include <atomic>
#include <exception>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "countvqa/model_adapter.hpp"

namespace countvqa {

struct RunOptions {
  int workers = 4;
  std::optional<std::size_t> max_queries;  // stop after this many new queries
  std::function<void(std::size_t done, std::size_t total)> progress;
};

struct RunSummary {
  std::size_t total = 0;          // distinct questions
  std::size_t resumed = 0;        // already answered in the log
  std::size_t queried = 0;        // answered in this invocation
  bool complete = false;
};

inline void write_responses(const std::filesystem::path& path, std::span<const QuestionRecord> questions,
                            const std::unordered_map<std::string, ResponseRecord>& answered) {
  AtomicFile f(path);
  std::unordered_set<std::string> seen;
  for (const auto& q : questions) {
    if (!seen.insert(q.question_id).second) continue;
    auto it = answered.find(q.question_id);
    if (it != answered.end()) f.write_line(to_json(it->second));
  }
  f.commit();
}

inline RunSummary run_eval(std::span<const QuestionRecord> questions, Adapter& adapter,
                           const std::filesystem::path& responses_path, const std::filesystem::path& log_path,
                           const RunOptions& opts = {}) {
  auto answered = RunLog::load(log_path);

  RunSummary summary;
  std::vector<const QuestionRecord*> pending;
  std::unordered_set<std::string> seen;
  for (const auto& q : questions) {
    if (!seen.insert(q.question_id).second) continue;
    ++summary.total;
    if (answered.contains(q.question_id)) {
      ++summary.resumed;
    } else {
      pending.push_back(&q);
    }
  }
  if (opts.max_queries && pending.size() > *opts.max_queries) pending.resize(*opts.max_queries);

  RunLog log(log_path);
  std::mutex results_mu;
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::atomic<bool> stop{false};
  std::exception_ptr failure;

  const auto worker = [&] {
    for (;;) {
      if (stop.load()) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= pending.size()) return;
      const QuestionRecord& q = *pending[i];
      try {
        ResponseRecord r = query(q, adapter);
        log.append(r, adapter.request_hash(q));
        {
          std::lock_guard lock(results_mu);
          answered[q.question_id] = std::move(r);
        }
        const std::size_t n = done.fetch_add(1) + 1;
        if (opts.progress) opts.progress(n, pending.size());
      } catch (...) {
        std::lock_guard lock(results_mu);
        if (!failure) failure = std::current_exception();
        stop.store(true);
        return;
      }
    }
  };

  const int n_workers = std::max(1, std::min<int>(opts.workers, static_cast<int>(pending.size())));
  {
    std::vector<std::jthread> pool;
    for (int w = 0; w < n_workers && !pending.empty(); ++w) pool.emplace_back(worker);
  }

  summary.queried = done.load();
  write_responses(responses_path, questions, answered);
  if (failure) std::rethrow_exception(failure);
  summary.complete = summary.resumed + summary.queried == summary.total;
  return summary;
}

}  // namespace countvqa
