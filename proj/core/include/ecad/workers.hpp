#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "ecad/config.hpp"
#include "ecad/dispatch.hpp"
#include "ecad/nnsim.hpp"

namespace ecad::dispatch {

// Analytical hardware model. Needs the network's systolic section.
class HwDbWorker : public Worker {
 public:
  HwDbWorker(HwConfig hw, HwModelConfig model) : hw_(std::move(hw)), model_(std::move(model)) {}
  EvalResult evaluate(const EvalJob& job, std::chrono::milliseconds timeout) override;

 private:
  HwConfig hw_;
  HwModelConfig model_;
};

// Trains the network natively and reports test accuracy. Job params:
// epochs, batchSize, seed, trainSubset, testSubset.
class SimWorker : public Worker {
 public:
  SimWorker(std::shared_ptr<const nn::Dataset> data, nn::TrainOptions defaults)
      : data_(std::move(data)), defaults_(defaults) {}
  EvalResult evaluate(const EvalJob& job, std::chrono::milliseconds timeout) override;

 private:
  std::shared_ptr<const nn::Dataset> data_;
  nn::TrainOptions defaults_;
};

// Stand-in accuracy that grows with the first hidden layer's width:
// 0.99 - 0.6 * exp(-neurons / 64).
class SyntheticAccuracyWorker : public Worker {
 public:
  EvalResult evaluate(const EvalJob& job, std::chrono::milliseconds timeout) override;
  static double accuracy_for(const NetworkDescription& desc);
};

// Returns a fixed metric map for every job.
class PhysWorkerStub : public Worker {
 public:
  explicit PhysWorkerStub(std::map<std::string, double> canned) : canned_(std::move(canned)) {}
  EvalResult evaluate(const EvalJob& job, std::chrono::milliseconds timeout) override;

 private:
  std::map<std::string, double> canned_;
};

// Talks to `<exe> worker --type <type> [args...]` over stdin/stdout pipes. The
// child is started on first use and restarted after a crash or timeout.
class ProcessWorker : public Worker {
 public:
  ProcessWorker(std::filesystem::path exe, EvalType type, std::vector<std::string> extra_args = {});
  ~ProcessWorker() override;
  EvalResult evaluate(const EvalJob& job, std::chrono::milliseconds timeout) override;

  int restarts() const { return restarts_; }

 private:
  void start();
  void stop();

  std::filesystem::path exe_;
  EvalType type_;
  std::vector<std::string> extra_args_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
  int restarts_ = 0;
};

// Worker process loop: one EvalJob per input line, one EvalResult per output
// line. Exceptions become failed results. Returns 0 at end of input.
int serve(Worker& worker, std::istream& in, std::ostream& out);

struct WorkerSetup {
  HwConfig hw;
  HwModelConfig hw_model;
  std::shared_ptr<const nn::Dataset> data;  // required for simJob unless synthetic
  nn::TrainOptions train_defaults;
  bool synthetic_accuracy = false;
  std::map<std::string, double> phys_canned{{"effective_gops", 1.0}, {"latency_ms", 1.0}};
};

std::unique_ptr<Worker> make_worker(EvalType type, const WorkerSetup& setup);

}  // namespace ecad::dispatch
