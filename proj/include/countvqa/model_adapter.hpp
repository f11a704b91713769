#pragma once

// Answer sources. An Adapter turns a QuestionRecord into raw model text; the
// local ones (oracle, random, replay) make the pipeline testable without a
// model, and every run is logged so it can be replayed later.

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>

#include "countvqa/errors.hpp"
#include "countvqa/hashing.hpp"
#include "countvqa/jsonl.hpp"
#include "countvqa/question_gen.hpp"
#include "countvqa/response_parse.hpp"
#include "countvqa/rng.hpp"

namespace countvqa {

struct ResponseRecord {
  std::string question_id;
  std::string raw_text;
  double latency_ms = 0.0;
  std::string adapter;
  int attempt_count = 1;
};

struct AdapterReply {
  std::string raw_text;
  int attempts = 1;
};

/// Implementations must be safe to call from several threads at once.
class Adapter {
 public:
  virtual ~Adapter() = default;
  virtual std::string name() const = 0;
  virtual AdapterReply ask(const QuestionRecord& q) = 0;

  /// Fingerprint of what was asked, written to the run log.
  virtual std::string request_hash(const QuestionRecord& q) const {
    return sha256_hex(json::array({name(), q.image_ref, q.prompt}).dump()).substr(0, 16);
  }
};

/// Sends `q` to `adapter` and times the call.
inline ResponseRecord query(const QuestionRecord& q, Adapter& adapter) {
  const auto start = std::chrono::steady_clock::now();
  AdapterReply reply = adapter.ask(q);
  const auto stop = std::chrono::steady_clock::now();
  return ResponseRecord{q.question_id, std::move(reply.raw_text),
                        std::chrono::duration<double, std::milli>(stop - start).count(), adapter.name(),
                        reply.attempts};
}

/// Always answers with the gold answer in its shortest text form.
class OracleAdapter final : public Adapter {
 public:
  std::string name() const override { return "oracle"; }
  AdapterReply ask(const QuestionRecord& q) override { return {render_answer(q), 1}; }
};

/// Uniform guesses: counts in 1..10, yes/no, one of {c1, c2, "same"}, one of
/// A/B/C. Each question draws from its own sub-seed, so answers do not depend
/// on query order or concurrency.
class RandomAdapter final : public Adapter {
 public:
  explicit RandomAdapter(std::uint64_t seed) : seed_(seed) {}

  std::string name() const override { return "random"; }

  AdapterReply ask(const QuestionRecord& q) override {
    Rng rng(derive_seed(seed_, q.question_id));
    switch (q.family) {
      case Family::primal: return {std::to_string(rng.uniform_int(1, 10)), 1};
      case Family::binary_I:
      case Family::binary_II:
      case Family::binary_III: return {rng.coin() ? "Yes" : "No", 1};
      case Family::compare_I: {
        const auto pick = rng.uniform_below(3);
        return {pick == 2 ? std::string("same") : q.categories.at(pick), 1};
      }
      case Family::compare_II: {
        static constexpr std::string_view kOptions[] = {"A", "B", "C"};
        return {std::string(kOptions[rng.uniform_below(3)]), 1};
      }
      default: throw DataError("random adapter cannot answer " + std::string(to_string(q.family)) + " questions");
    }
  }

 private:
  std::uint64_t seed_;
};

// ---------------------------------------------------------------------------
// Run log

inline constexpr std::string_view kRunLogSchema = "log/1";
inline constexpr std::string_view kResponseSchema = "rr/1";

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Append-only JSONL of every answered request. Writes are serialized and
/// flushed per line, so an interrupted run leaves only whole lines behind
/// (a torn final line is ignored on load).
class RunLog {
 public:
  explicit RunLog(const std::filesystem::path& path) : path_(path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    drop_torn_tail(path);
    out_.open(path, std::ios::binary | std::ios::app);
    if (!out_) throw DataError("cannot open run log " + path.string());
  }

  void append(const ResponseRecord& r, const std::string& request_hash) {
    const json line{{"schema", kRunLogSchema},   {"question_id", r.question_id},
                    {"request_hash", request_hash}, {"raw_text", r.raw_text},
                    {"latency_ms", r.latency_ms},   {"ts", utc_timestamp()},
                    {"adapter", r.adapter},         {"attempt_count", r.attempt_count}};
    std::lock_guard lock(mu_);
    out_ << line.dump() << '\n';
    out_.flush();
  }

  /// Latest entry per question id. Missing file -> empty map.
  static std::unordered_map<std::string, ResponseRecord> load(const std::filesystem::path& path) {
    std::unordered_map<std::string, ResponseRecord> out;
    if (!std::filesystem::exists(path)) return out;
    const std::string text = read_file(path);
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
      const auto nl = text.find('\n', pos);
      if (nl == std::string::npos) break;  // unterminated tail: an interrupted write
      const std::size_t start = pos;
      const std::string_view line(text.data() + start, nl - start);
      pos = nl + 1;
      ++line_no;
      if (line.empty()) continue;
      json obj = json::parse(line, nullptr, /*allow_exceptions=*/false);
      if (obj.is_discarded()) {
        throw ParseError(path.string() + ":" + std::to_string(line_no) + ": malformed log line", start);
      }
      require_schema(obj, kRunLogSchema, path.string() + ":" + std::to_string(line_no));
      ResponseRecord r;
      r.question_id = obj.at("question_id").get<std::string>();
      r.raw_text = obj.at("raw_text").get<std::string>();
      r.latency_ms = obj.value("latency_ms", 0.0);
      r.adapter = obj.value("adapter", std::string());
      r.attempt_count = obj.value("attempt_count", 1);
      out[r.question_id] = std::move(r);
    }
    return out;
  }

 private:
  // Cuts a partial last line left by a crash, so new entries start on a
  // fresh line instead of being glued onto the fragment.
  static void drop_torn_tail(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) return;
    const std::string text = read_file(path);
    if (text.empty() || text.back() == '\n') return;
    const auto last_nl = text.rfind('\n');
    std::filesystem::resize_file(path, last_nl == std::string::npos ? 0 : last_nl + 1);
  }

  std::filesystem::path path_;
  std::mutex mu_;
  std::ofstream out_;
};

/// Answers from a previous run log, keyed by question id.
class ReplayAdapter final : public Adapter {
 public:
  explicit ReplayAdapter(const std::filesystem::path& log_path) : log_(RunLog::load(log_path)) {}
  explicit ReplayAdapter(std::unordered_map<std::string, ResponseRecord> log) : log_(std::move(log)) {}

  std::string name() const override { return "replay"; }

  AdapterReply ask(const QuestionRecord& q) override {
    auto it = log_.find(q.question_id);
    if (it == log_.end()) throw ReplayMiss(q.question_id);
    return {it->second.raw_text, 1};
  }

 private:
  std::unordered_map<std::string, ResponseRecord> log_;
};

// ---------------------------------------------------------------------------
// Responses file

inline json to_json(const ResponseRecord& r) {
  // Latency stays in the run log; the responses file holds only what the
  // analysis needs, so re-runs produce identical bytes.
  return json{{"schema", kResponseSchema},
              {"question_id", r.question_id},
              {"raw_text", r.raw_text},
              {"adapter", r.adapter},
              {"attempt_count", r.attempt_count}};
}

inline std::vector<ResponseRecord> read_responses(const std::filesystem::path& path) {
  std::vector<ResponseRecord> out;
  for_each_jsonl(path, [&](const json& obj, std::size_t line) {
    const std::string where = path.string() + ":" + std::to_string(line);
    require_schema(obj, kResponseSchema, where);
    try {
      out.push_back({obj.at("question_id").get<std::string>(), obj.at("raw_text").get<std::string>(), 0.0,
                     obj.value("adapter", std::string()), obj.value("attempt_count", 1)});
    } catch (const json::exception& e) {
      throw DataError(where + ": " + e.what());
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Rate limiting

class Clock {
 public:
  virtual ~Clock() = default;
  virtual double now_seconds() = 0;
  virtual void sleep_for(double seconds) = 0;
};

class SteadyClock final : public Clock {
 public:
  double now_seconds() override {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
  }
  void sleep_for(double seconds) override {
    if (seconds > 0) std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
  }
};

/// Token bucket: `rate` tokens per second, holding at most `burst`.
class TokenBucket {
 public:
  TokenBucket(double rate, double burst, Clock& clock)
      : rate_(rate), burst_(burst), tokens_(burst), clock_(clock), last_(clock.now_seconds()) {
    if (!(rate > 0)) throw ConfigError("rate limit must be > 0");
    if (burst < 1) throw ConfigError("rate limit burst must be >= 1");
  }

  /// Blocks until a token is available and takes it.
  void acquire() {
    std::unique_lock lock(mu_);
    for (;;) {
      refill();
      if (tokens_ >= 1.0) {
        tokens_ -= 1.0;
        return;
      }
      const double wait = (1.0 - tokens_) / rate_;
      lock.unlock();
      clock_.sleep_for(wait);
      lock.lock();
    }
  }

 private:
  void refill() {
    const double now = clock_.now_seconds();
    tokens_ = std::min(burst_, tokens_ + (now - last_) * rate_);
    last_ = now;
  }

  double rate_;
  double burst_;
  double tokens_;
  Clock& clock_;
  double last_;
  std::mutex mu_;
};

}  // namespace countvqa
