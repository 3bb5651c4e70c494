#include "ecad/dispatch.hpp"

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <mutex>
#include <optional>
#include <thread>

namespace ecad::dispatch {
namespace {

using Clock = std::chrono::steady_clock;
using std::chrono::milliseconds;

Json metrics_json(const std::map<std::string, double>& metrics) {
  Json m = Json::object();
  for (const auto& [k, v] : metrics) {
    if (std::isfinite(v)) {
      m[k] = v;
    } else {
      m[k] = nullptr;
    }
  }
  return m;
}

}  // namespace

EvalResult EvalResult::failure(const EvalJob& job, std::string why) {
  EvalResult r;
  r.job_id = job.job_id;
  r.genome_id = job.genome_id;
  r.eval_type = job.eval_type;
  r.status = Status::kFailed;
  r.diagnostics = std::move(why);
  return r;
}

Json to_json(const EvalJob& job) {
  Json j = Json::object();
  j["job_id"] = job.job_id;
  j["genome_id"] = job.genome_id;
  j["eval_type"] = std::string(to_string(job.eval_type));
  j["network"] = to_json(job.network);
  j["params"] = job.params;
  return j;
}

EvalJob eval_job_from_json(const Json& j) {
  EvalJob job;
  job.job_id = j.at("job_id").get<JobId>();
  job.genome_id = j.at("genome_id").get<GenomeId>();
  job.eval_type = eval_type_from_string(j.at("eval_type").get<std::string>());
  job.network = description_from_json(j.at("network"));
  job.params = j.value("params", Json::object());
  return job;
}

Json to_json(const EvalResult& r) {
  Json j = Json::object();
  j["job_id"] = r.job_id;
  j["genome_id"] = r.genome_id;
  j["eval_type"] = std::string(to_string(r.eval_type));
  j["metrics"] = metrics_json(r.metrics);
  j["status"] = r.ok() ? "ok" : "failed";
  j["diagnostics"] = r.diagnostics;
  return j;
}

EvalResult eval_result_from_json(const Json& j) {
  EvalResult r;
  r.job_id = j.at("job_id").get<JobId>();
  r.genome_id = j.at("genome_id").get<GenomeId>();
  r.eval_type = eval_type_from_string(j.at("eval_type").get<std::string>());
  for (const auto& [k, v] : j.at("metrics").items()) {
    r.metrics[k] = v.is_null() ? std::nan("") : v.get<double>();
  }
  const auto status = j.at("status").get<std::string>();
  if (status == "ok") {
    r.status = Status::kOk;
  } else if (status == "failed") {
    r.status = Status::kFailed;
  } else {
    throw std::invalid_argument("unknown result status \"" + status + "\"");
  }
  r.diagnostics = j.value("diagnostics", "");
  return r;
}

std::string encode_line(const EvalJob& job) { return to_json(job).dump() + "\n"; }
std::string encode_line(const EvalResult& r) { return to_json(r).dump() + "\n"; }
EvalJob decode_job_line(const std::string& line) { return eval_job_from_json(Json::parse(line)); }
EvalResult decode_result_line(const std::string& line) {
  return eval_result_from_json(Json::parse(line));
}

Dispatcher::Dispatcher(std::vector<WorkerEndpoint> endpoints, DispatchOptions options)
    : endpoints_(std::move(endpoints)), options_(options) {
  if (options_.max_attempts < 1) throw DispatchError("max_attempts must be >= 1");
  for (const auto& ep : endpoints_) {
    if (ep.slots < 1) throw DispatchError("endpoint slots must be >= 1");
    if (!ep.factory) throw DispatchError("endpoint has no worker factory");
    for (int i = 0; i < ep.slots; ++i) slots_.push_back({ep.eval_type, ep.factory()});
  }
}

Dispatcher::~Dispatcher() = default;

bool Dispatcher::serves(EvalType type) const {
  return std::any_of(slots_.begin(), slots_.end(), [&](const Slot& s) { return s.type == type; });
}

milliseconds Dispatcher::timeout_for(EvalType type) const {
  auto it = durations_ms_.find(type);
  if (it == durations_ms_.end() || it->second.empty()) return options_.timeout_floor;
  std::vector<double> v(it->second.begin(), it->second.end());
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2), v.end());
  const double median = v[v.size() / 2];
  const auto scaled = milliseconds(static_cast<std::int64_t>(std::ceil(options_.timeout_factor * median)));
  return std::max(options_.timeout_floor, scaled);
}

void Dispatcher::record_duration(EvalType type, milliseconds d) {
  auto& window = durations_ms_[type];
  window.push_back(static_cast<double>(d.count()));
  while (window.size() > options_.median_window) window.pop_front();
}

std::vector<EvalResult> Dispatcher::dispatch_all(
    const std::vector<EvalJob>& jobs, const std::function<void(const EvalResult&)>& on_result) {
  for (const auto& job : jobs) {
    if (!serves(job.eval_type)) {
      throw DispatchError("no worker endpoint for " + std::string(to_string(job.eval_type)));
    }
  }
  const std::size_t n = jobs.size();
  std::vector<std::optional<EvalResult>> terminal(n);
  if (n == 0) return {};

  struct Attempt {
    std::size_t job;
    int number;
    milliseconds timeout;
  };
  struct Outcome {
    std::size_t job;
    int number;
    std::optional<EvalResult> result;
    std::string error;
    milliseconds elapsed;
  };
  struct InFlight {
    Clock::time_point deadline;
    bool live = true;
  };

  std::mutex mu;
  std::condition_variable work_cv, result_cv;
  std::map<EvalType, std::deque<Attempt>> queues;
  std::deque<Outcome> outcomes;
  std::map<std::pair<std::size_t, int>, InFlight> in_flight;
  std::vector<int> attempts(n, 0);
  std::vector<int> live_attempt(n, 0);
  std::uint64_t started = 0;  // bumped whenever a slot picks up an attempt
  bool stop = false;

  auto enqueue = [&](std::size_t job) {  // caller holds mu
    const int number = ++attempts[job];
    live_attempt[job] = number;
    ++stats_.attempts;
    queues[jobs[job].eval_type].push_back({job, number, timeout_for(jobs[job].eval_type)});
  };

  std::vector<std::thread> threads;
  threads.reserve(slots_.size());
  for (auto& slot : slots_) {
    threads.emplace_back([&, s = &slot] {
      std::unique_lock lock(mu);
      while (true) {
        work_cv.wait(lock, [&] { return stop || !queues[s->type].empty(); });
        if (stop) return;
        const Attempt a = queues[s->type].front();
        queues[s->type].pop_front();
        const auto start = Clock::now();
        in_flight[{a.job, a.number}] = {start + a.timeout, true};
        ++started;
        result_cv.notify_one();
        lock.unlock();

        Outcome out{a.job, a.number, std::nullopt, {}, {}};
        try {
          EvalResult r = s->worker->evaluate(jobs[a.job], a.timeout);
          if (r.job_id != jobs[a.job].job_id || r.genome_id != jobs[a.job].genome_id) {
            throw WorkerCrashed("worker answered job " + std::to_string(r.job_id) + " for job " +
                                std::to_string(jobs[a.job].job_id));
          }
          r.eval_type = jobs[a.job].eval_type;
          out.result = std::move(r);
        } catch (const std::exception& e) {
          out.error = e.what();
        } catch (...) {
          out.error = "unknown worker exception";
        }
        out.elapsed = std::chrono::duration_cast<milliseconds>(Clock::now() - start);

        lock.lock();
        outcomes.push_back(std::move(out));
        result_cv.notify_one();
      }
    });
  }

  std::size_t done = 0;
  std::vector<EvalResult> fresh;
  std::unique_lock lock(mu);
  for (std::size_t i = 0; i < n; ++i) enqueue(i);
  work_cv.notify_all();

  auto finish = [&](std::size_t job, EvalResult r) {  // caller holds mu
    if (!r.ok()) ++stats_.failed;
    terminal[job] = r;
    fresh.push_back(std::move(r));
    ++done;
  };
  auto retry_or_fail = [&](std::size_t job, const std::string& why) {
    if (attempts[job] < options_.max_attempts) {
      ++stats_.requeued;
      enqueue(job);
      work_cv.notify_all();
    } else {
      finish(job, EvalResult::failure(jobs[job], "gave up after " + std::to_string(attempts[job]) +
                                                     " attempts: " + why));
    }
  };

  while (done < n) {
    auto next_deadline = Clock::time_point::max();
    for (const auto& [key, f] : in_flight) {
      if (f.live) next_deadline = std::min(next_deadline, f.deadline);
    }
    if (outcomes.empty()) {
      const auto seen = started;
      auto wake = [&] { return !outcomes.empty() || started != seen; };
      if (next_deadline == Clock::time_point::max()) {
        result_cv.wait(lock, wake);
      } else {
        result_cv.wait_until(lock, next_deadline, wake);
      }
    }

    while (!outcomes.empty()) {
      Outcome o = std::move(outcomes.front());
      outcomes.pop_front();
      auto it = in_flight.find({o.job, o.number});
      const bool live = it != in_flight.end() && it->second.live;
      if (it != in_flight.end()) in_flight.erase(it);
      if (terminal[o.job]) {
        if (o.result) ++stats_.duplicates_dropped;
        continue;
      }
      if (o.result) {
        // A late answer from a timed-out attempt still counts if it is first.
        if (o.result->ok()) record_duration(jobs[o.job].eval_type, o.elapsed);
        finish(o.job, std::move(*o.result));
      } else if (live) {
        retry_or_fail(o.job, o.error);
      }
    }

    const auto now = Clock::now();
    for (auto& [key, f] : in_flight) {
      if (!f.live || now < f.deadline || terminal[key.first]) continue;
      f.live = false;
      ++stats_.timeouts;
      if (live_attempt[key.first] == key.second) retry_or_fail(key.first, "timed out");
    }

    if (!fresh.empty() && on_result) {
      auto batch = std::move(fresh);
      fresh.clear();
      lock.unlock();
      for (const auto& r : batch) on_result(r);
      lock.lock();
    }
    fresh.clear();
  }
  stop = true;
  work_cv.notify_all();
  lock.unlock();
  for (auto& t : threads) t.join();
  // Answers from abandoned attempts that finished after the last terminal result.
  for (const auto& o : outcomes) {
    if (o.result) ++stats_.duplicates_dropped;
  }

  std::vector<EvalResult> results;
  results.reserve(n);
  for (auto& r : terminal) results.push_back(std::move(*r));
  return results;
}

}  // namespace ecad::dispatch
