#include "ecad/workers.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

#include "ecad/hwmodel.hpp"

namespace ecad::dispatch {
namespace {

using Clock = std::chrono::steady_clock;

EvalResult ok_result(const EvalJob& job, std::map<std::string, double> metrics) {
  EvalResult r;
  r.job_id = job.job_id;
  r.genome_id = job.genome_id;
  r.eval_type = job.eval_type;
  r.metrics = std::move(metrics);
  return r;
}

template <typename T>
T param_or(const Json& params, const char* key, T fallback) {
  auto it = params.find(key);
  if (it == params.end() || it->is_null()) return fallback;
  return it->template get<T>();
}

}  // namespace

EvalResult HwDbWorker::evaluate(const EvalJob& job, std::chrono::milliseconds) {
  if (!job.network.systolic) return EvalResult::failure(job, "network has no systolic section");
  const auto est = hw::estimate(job.network, *job.network.systolic, hw_, model_);
  return ok_result(job, est.metrics());
}

EvalResult SimWorker::evaluate(const EvalJob& job, std::chrono::milliseconds) {
  if (!data_) return EvalResult::failure(job, "no dataset loaded");
  nn::TrainOptions opts = defaults_;
  opts.epochs = param_or(job.params, "epochs", opts.epochs);
  opts.batch_size = param_or(job.params, "batchSize", opts.batch_size);
  opts.seed = param_or<std::uint64_t>(job.params, "seed", opts.seed);
  if (job.params.contains("trainSubset")) opts.train_subset = job.params["trainSubset"].get<std::size_t>();
  if (job.params.contains("testSubset")) opts.test_subset = job.params["testSubset"].get<std::size_t>();
  try {
    const auto result = nn::train(job.network, *data_, opts);
    // Wall-clock training time stays out of the metrics so runs are reproducible.
    return ok_result(job, {{"accuracy", result.report.accuracy},
                           {"epochs", static_cast<double>(result.report.epochs)},
                           {"batch_size", static_cast<double>(result.report.batch_size)}});
  } catch (const nn::TrainingDiverged& e) {
    return EvalResult::failure(job, e.what());
  }
}

double SyntheticAccuracyWorker::accuracy_for(const NetworkDescription& desc) {
  const double neurons = desc.layers.size() > 1 ? static_cast<double>(desc.layers.front().out) : 0.0;
  return 0.99 - 0.6 * std::exp(-neurons / 64.0);
}

EvalResult SyntheticAccuracyWorker::evaluate(const EvalJob& job, std::chrono::milliseconds) {
  return ok_result(job, {{"accuracy", accuracy_for(job.network)}});
}

EvalResult PhysWorkerStub::evaluate(const EvalJob& job, std::chrono::milliseconds) {
  return ok_result(job, canned_);
}

ProcessWorker::ProcessWorker(std::filesystem::path exe, EvalType type,
                             std::vector<std::string> extra_args)
    : exe_(std::move(exe)), type_(type), extra_args_(std::move(extra_args)) {}

ProcessWorker::~ProcessWorker() { stop(); }

void ProcessWorker::start() {
  // A dead child must surface as a write error, not kill the master.
  signal(SIGPIPE, SIG_IGN);
  int in_pipe[2];
  int out_pipe[2];
  if (pipe2(in_pipe, O_CLOEXEC) != 0) throw WorkerCrashed(std::string("pipe: ") + std::strerror(errno));
  if (pipe2(out_pipe, O_CLOEXEC) != 0) {
    close(in_pipe[0]);
    close(in_pipe[1]);
    throw WorkerCrashed(std::string("pipe: ") + std::strerror(errno));
  }
  std::vector<std::string> args{exe_.string(), "worker", "--type", std::string(to_string(type_))};
  args.insert(args.end(), extra_args_.begin(), extra_args_.end());
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);

  const pid_t pid = fork();
  if (pid < 0) throw WorkerCrashed(std::string("fork: ") + std::strerror(errno));
  if (pid == 0) {
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    execv(argv[0], argv.data());
    _exit(127);
  }
  close(in_pipe[0]);
  close(out_pipe[1]);
  pid_ = pid;
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  buffer_.clear();
}

void ProcessWorker::stop() {
  if (to_child_ >= 0) close(to_child_);
  if (from_child_ >= 0) close(from_child_);
  to_child_ = from_child_ = -1;
  if (pid_ > 0) {
    kill(pid_, SIGKILL);
    waitpid(pid_, nullptr, 0);
  }
  pid_ = -1;
  buffer_.clear();
}

EvalResult ProcessWorker::evaluate(const EvalJob& job, std::chrono::milliseconds timeout) {
  if (pid_ < 0) start();
  const std::string line = encode_line(job);
  std::size_t written = 0;
  while (written < line.size()) {
    const ssize_t n = write(to_child_, line.data() + written, line.size() - written);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) {
      stop();
      ++restarts_;
      throw WorkerCrashed("worker pipe closed while sending job " + std::to_string(job.job_id));
    }
    written += static_cast<std::size_t>(n);
  }

  const auto deadline = Clock::now() + std::min(timeout, std::chrono::milliseconds(86'400'000));
  while (true) {
    if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
      const std::string reply = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      try {
        return decode_result_line(reply);
      } catch (const std::exception& e) {
        stop();
        ++restarts_;
        throw WorkerCrashed(std::string("malformed worker reply: ") + e.what());
      }
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
    if (left.count() <= 0) {
      stop();
      ++restarts_;
      throw WorkerCrashed("worker timed out on job " + std::to_string(job.job_id));
    }
    pollfd pfd{from_child_, POLLIN, 0};
    const int rc = poll(&pfd, 1, static_cast<int>(std::min<std::int64_t>(left.count(), 1 << 30)));
    if (rc < 0 && errno == EINTR) continue;
    if (rc <= 0) continue;
    char chunk[65536];
    const ssize_t n = read(from_child_, chunk, sizeof(chunk));
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) {
      stop();
      ++restarts_;
      throw WorkerCrashed("worker exited while running job " + std::to_string(job.job_id));
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

int serve(Worker& worker, std::istream& in, std::ostream& out) {
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    EvalJob job;
    try {
      job = decode_job_line(line);
    } catch (const std::exception& e) {
      EvalResult bad;
      bad.status = Status::kFailed;
      bad.diagnostics = std::string("bad job line: ") + e.what();
      out << encode_line(bad) << std::flush;
      continue;
    }
    EvalResult r;
    try {
      r = worker.evaluate(job, std::chrono::milliseconds::max());
    } catch (const std::exception& e) {
      r = EvalResult::failure(job, e.what());
    }
    out << encode_line(r) << std::flush;
  }
  return 0;
}

std::unique_ptr<Worker> make_worker(EvalType type, const WorkerSetup& setup) {
  switch (type) {
    case EvalType::kHwDb:
      return std::make_unique<HwDbWorker>(setup.hw, setup.hw_model);
    case EvalType::kSim:
      if (setup.synthetic_accuracy) return std::make_unique<SyntheticAccuracyWorker>();
      return std::make_unique<SimWorker>(setup.data, setup.train_defaults);
    case EvalType::kPhys:
      return std::make_unique<PhysWorkerStub>(setup.phys_canned);
  }
  throw DispatchError("unknown eval type");
}

}  // namespace ecad::dispatch
