#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "ecad/config.hpp"
#include "ecad/genome.hpp"
#include "ecad/network.hpp"

namespace ecad::dispatch {

using JobId = std::uint64_t;

struct EvalJob {
  JobId job_id = 0;
  GenomeId genome_id = 0;
  EvalType eval_type = EvalType::kHwDb;
  NetworkDescription network;
  Json params = Json::object();  // epochs, batchSize, seed, ...

  bool operator==(const EvalJob&) const = default;
};

enum class Status { kOk, kFailed };

struct EvalResult {
  JobId job_id = 0;
  GenomeId genome_id = 0;
  EvalType eval_type = EvalType::kHwDb;
  std::map<std::string, double> metrics;
  Status status = Status::kOk;
  std::string diagnostics;

  bool ok() const { return status == Status::kOk; }
  static EvalResult failure(const EvalJob& job, std::string why);
};

Json to_json(const EvalJob& job);
EvalJob eval_job_from_json(const Json& j);
Json to_json(const EvalResult& r);
EvalResult eval_result_from_json(const Json& j);

// Wire format: one compact JSON object per line.
std::string encode_line(const EvalJob& job);
std::string encode_line(const EvalResult& r);
EvalJob decode_job_line(const std::string& line);
EvalResult decode_result_line(const std::string& line);

// Thrown by a worker whose backend died (crash, hang, broken pipe). The
// dispatcher retries these; a returned failed EvalResult is final.
class WorkerCrashed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DispatchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Worker {
 public:
  virtual ~Worker() = default;
  // `timeout` is the dispatcher's current limit; workers that can enforce it
  // (process transport) throw WorkerCrashed when it expires.
  virtual EvalResult evaluate(const EvalJob& job, std::chrono::milliseconds timeout) = 0;
};

using WorkerFactory = std::function<std::unique_ptr<Worker>()>;

enum class Transport { kInProcess, kPipe };

struct WorkerEndpoint {
  EvalType eval_type = EvalType::kHwDb;
  Transport transport = Transport::kInProcess;
  int slots = 1;
  WorkerFactory factory;
};

struct DispatchOptions {
  int max_attempts = 3;  // first try plus two retries
  std::chrono::milliseconds timeout_floor{30000};
  double timeout_factor = 10.0;
  std::size_t median_window = 64;
};

struct DispatchStats {
  std::int64_t attempts = 0;
  std::int64_t requeued = 0;
  std::int64_t timeouts = 0;
  std::int64_t duplicates_dropped = 0;
  std::int64_t failed = 0;
};

// Routes jobs to per-type worker slots. Each slot owns one Worker instance and
// runs it on its own thread during dispatch_all; results come back through a
// single channel to the calling thread.
class Dispatcher {
 public:
  explicit Dispatcher(std::vector<WorkerEndpoint> endpoints, DispatchOptions options = {});
  ~Dispatcher();
  Dispatcher(const Dispatcher&) = delete;
  Dispatcher& operator=(const Dispatcher&) = delete;

  bool serves(EvalType type) const;
  // max(floor, factor * rolling median of successful completion times).
  std::chrono::milliseconds timeout_for(EvalType type) const;

  // Blocks until every job has exactly one terminal result. on_result fires on
  // the calling thread in completion order. Returned results follow job order.
  std::vector<EvalResult> dispatch_all(const std::vector<EvalJob>& jobs,
                                       const std::function<void(const EvalResult&)>& on_result = {});

  const DispatchStats& stats() const { return stats_; }

 private:
  struct Slot {
    EvalType type;
    std::unique_ptr<Worker> worker;
  };

  void record_duration(EvalType type, std::chrono::milliseconds d);

  std::vector<WorkerEndpoint> endpoints_;
  DispatchOptions options_;
  std::vector<Slot> slots_;
  std::map<EvalType, std::deque<double>> durations_ms_;
  DispatchStats stats_;
};

}  // namespace ecad::dispatch
