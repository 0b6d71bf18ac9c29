#pragma once

#include <condition_variable>
#include <deque>
#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "orca/model.h"
#include "orca/tensor.h"

namespace orca {

struct InferenceRequest {
  std::shared_ptr<const ModelSpec> model;
  Tensor input;  // f32 [rows x width]
  bool vector_output = false;  // caller passed 1-D inputs; reply with [out]
  std::vector<std::string> output_keys;
  std::promise<void> done;
};

// Drains up to `batch_size` pending requests that target the same model as
// the front of the queue, preserving arrival order. Never waits.
std::vector<InferenceRequest> batch_collect(
    std::deque<InferenceRequest>& queue, size_t batch_size);

// Stacks inputs along the leading axis, runs the model once, and splits the
// result back per input in order.
std::vector<Tensor> execute_batch(
    const ModelSpec& m, std::span<const Tensor> inputs,
    KernelPolicy policy = KernelPolicy::parallel);

// Pending-request queue drained by worker threads. Each worker repeatedly
// collects one batch and hands it to the executor, which is responsible for
// fulfilling every request's promise.
class InferenceQueue {
 public:
  using Executor = std::function<void(std::vector<InferenceRequest>&)>;

  InferenceQueue(size_t workers, Executor executor);
  ~InferenceQueue();

  InferenceQueue(const InferenceQueue&) = delete;
  InferenceQueue& operator=(const InferenceQueue&) = delete;

  std::future<void> submit(InferenceRequest req);
  void shutdown();
  size_t pending() const;

 private:
  void worker_loop();

  Executor executor_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<InferenceRequest> queue_;
  bool stopping_ = false;
  std::vector<std::thread> workers_;
};

}  // namespace orca
