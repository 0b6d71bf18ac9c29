#include "orca/batcher.h"

#include <algorithm>
#include <cstring>

namespace orca {

std::vector<InferenceRequest>
batch_collect(std::deque<InferenceRequest>& queue, size_t batch_size)
{
  std::vector<InferenceRequest> batch;
  if (queue.empty()) {
    return batch;
  }
  const ModelSpec* model = queue.front().model.get();
  const size_t limit = std::max<size_t>(batch_size, 1);
  for (auto it = queue.begin(); it != queue.end() && batch.size() < limit;) {
    if (it->model.get() == model) {
      batch.push_back(std::move(*it));
      it = queue.erase(it);
    } else {
      ++it;
    }
  }
  return batch;
}

std::vector<Tensor>
execute_batch(const ModelSpec& m, std::span<const Tensor> inputs, KernelPolicy policy)
{
  if (inputs.empty()) {
    return {};
  }
  for (const auto& t : inputs) {
    check_model_input(m, t);
  }
  const uint32_t width = inputs[0].shape()[1];
  size_t rows = 0;
  for (const auto& t : inputs) {
    if (t.shape()[1] != width) {
      throw Error(ErrorCode::WidthMismatch, "batch members disagree on width");
    }
    rows += t.shape()[0];
  }

  Bytes stacked;
  stacked.reserve(rows * width * sizeof(float));
  for (const auto& t : inputs) {
    stacked.insert(stacked.end(), t.data().begin(), t.data().end());
  }
  const Tensor out = run_model_exec(
      m, Tensor(DType::f32, {static_cast<uint32_t>(rows), width}, std::move(stacked)), policy);

  const uint32_t out_width = out.shape()[1];
  const size_t row_bytes = static_cast<size_t>(out_width) * sizeof(float);
  std::vector<Tensor> split;
  split.reserve(inputs.size());
  size_t offset = 0;
  for (const auto& t : inputs) {
    const size_t r = t.shape()[0];
    Bytes part(out.data().begin() + static_cast<long>(offset * row_bytes),
               out.data().begin() + static_cast<long>((offset + r) * row_bytes));
    split.emplace_back(DType::f32, Shape{static_cast<uint32_t>(r), out_width}, std::move(part));
    offset += r;
  }
  return split;
}

InferenceQueue::InferenceQueue(size_t workers, Executor executor)
    : executor_(std::move(executor))
{
  workers = std::max<size_t>(workers, 1);
  for (size_t i = 0; i < workers; ++i) {
    workers_.emplace_back([this] { worker_loop(); });
  }
}

InferenceQueue::~InferenceQueue()
{
  shutdown();
}

std::future<void>
InferenceQueue::submit(InferenceRequest req)
{
  auto fut = req.done.get_future();
  {
    std::lock_guard<std::mutex> lock(mu_);
    if (stopping_) {
      req.done.set_exception(std::make_exception_ptr(
          Error(ErrorCode::ExecError, "inference queue is shutting down")));
      return fut;
    }
    queue_.push_back(std::move(req));
  }
  cv_.notify_one();
  return fut;
}

void
InferenceQueue::shutdown()
{
  {
    std::lock_guard<std::mutex> lock(mu_);
    if (stopping_ && workers_.empty()) {
      return;
    }
    stopping_ = true;
  }
  cv_.notify_all();
  for (auto& t : workers_) {
    if (t.joinable()) {
      t.join();
    }
  }
  workers_.clear();
  std::lock_guard<std::mutex> lock(mu_);
  for (auto& r : queue_) {
    r.done.set_exception(std::make_exception_ptr(
        Error(ErrorCode::ExecError, "inference queue shut down")));
  }
  queue_.clear();
}

size_t
InferenceQueue::pending() const
{
  std::lock_guard<std::mutex> lock(mu_);
  return queue_.size();
}

void
InferenceQueue::worker_loop()
{
  for (;;) {
    std::vector<InferenceRequest> batch;
    {
      std::unique_lock<std::mutex> lock(mu_);
      cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
      if (stopping_) {
        return;
      }
      batch = batch_collect(queue_, queue_.front().model->batch_size);
    }
    try {
      executor_(batch);
    }
    catch (...) {
      // The executor owns the promises; anything it failed to fulfil is
      // failed here so no caller waits forever.
      for (auto& r : batch) {
        try {
          r.done.set_exception(std::current_exception());
        }
        catch (const std::future_error&) {
        }
      }
    }
  }
}

}  // namespace orca
