#include <doctest.h>

#include <atomic>
#include <random>

#include "orca/batcher.h"
#include "test_support.h"

using namespace orca;

namespace {

std::shared_ptr<const ModelSpec>
mlp(uint64_t seed, uint32_t in, uint32_t out, uint32_t batch_size)
{
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-1, 1);
  DenseLayer a{in, 16, {}, {}}, b{16, out, {}, {}};
  a.weights.resize(in * 16);
  a.bias.resize(16);
  b.weights.resize(16 * out);
  b.bias.resize(out);
  for (auto* v : {&a.weights, &a.bias, &b.weights, &b.bias}) {
    for (auto& x : *v) x = u(rng);
  }
  auto m = std::make_shared<ModelSpec>();
  m->name = "m";
  m->layers = {a, TanhLayer{}, b};
  m->batch_size = batch_size;
  return m;
}

Tensor
rows(std::mt19937_64& rng, uint32_t n, uint32_t width)
{
  std::vector<float> v(n * width);
  for (auto& x : v) x = std::uniform_real_distribution<float>(-1, 1)(rng);
  return Tensor::from_values<float>({n, width}, v);
}

InferenceRequest
request(std::shared_ptr<const ModelSpec> m, Tensor t = {})
{
  InferenceRequest r;
  r.model = std::move(m);
  r.input = std::move(t);
  return r;
}

}  // namespace

TEST_CASE("batch_collect sizes")
{
  auto m = mlp(1, 4, 2, 10000);
  std::deque<InferenceRequest> q;
  for (int i = 0; i < 4; ++i) q.push_back(request(m));
  CHECK(batch_collect(q, 10000).size() == 4);
  CHECK(q.empty());

  q.push_back(request(m));
  CHECK(batch_collect(q, 10000).size() == 1);

  for (int i = 0; i < 12; ++i) q.push_back(request(m));
  CHECK(batch_collect(q, 8).size() == 8);
  CHECK(batch_collect(q, 8).size() == 4);
  CHECK(batch_collect(q, 8).empty());
}

TEST_CASE("batch_collect takes only the front request's model, in order")
{
  auto a = mlp(1, 4, 2, 100), b = mlp(2, 4, 2, 100);
  std::deque<InferenceRequest> q;
  std::mt19937_64 rng(1);
  for (int i = 0; i < 6; ++i) {
    q.push_back(request(i % 2 ? b : a, Tensor::from_values<float>({1}, std::vector<float>{float(i)})));
  }
  const auto batch = batch_collect(q, 100);
  REQUIRE(batch.size() == 3);
  CHECK(batch[0].input.values<float>()[0] == 0);
  CHECK(batch[1].input.values<float>()[0] == 2);
  CHECK(batch[2].input.values<float>()[0] == 4);
  CHECK(q.size() == 3);
  CHECK(q.front().model == b);
}

TEST_CASE("property: batching is transparent for any partition")
{
  std::mt19937_64 rng(17);
  auto m = mlp(3, 7, 3, 1);
  for (int trial = 0; trial < 50; ++trial) {
    const size_t n = 1 + rng() % 30;
    std::vector<Tensor> inputs;
    for (size_t i = 0; i < n; ++i) inputs.push_back(rows(rng, 1 + rng() % 5, 7));

    std::vector<Tensor> individual;
    for (const auto& t : inputs) individual.push_back(run_model_exec(*m, t));

    std::vector<Tensor> batched;
    size_t i = 0;
    while (i < n) {
      const size_t len = std::min(n - i, 1 + rng() % 8);
      auto part = execute_batch(*m, std::span<const Tensor>(inputs).subspan(i, len));
      batched.insert(batched.end(), part.begin(), part.end());
      i += len;
    }
    REQUIRE(batched.size() == n);
    for (size_t k = 0; k < n; ++k) CHECK(batched[k] == individual[k]);
  }
}

TEST_CASE("execute_batch rejects mixed widths")
{
  auto m = mlp(3, 7, 3, 1);
  std::mt19937_64 rng(1);
  std::vector<Tensor> inputs = {rows(rng, 2, 7), rows(rng, 2, 6)};
  CHECK(orca::testing::thrown([&] { execute_batch(*m, inputs); }) == "WidthMismatch");
}

TEST_CASE("InferenceQueue batches concurrent submissions")
{
  auto m = mlp(4, 5, 2, 10000);
  std::atomic<int> executions{0}, served{0};
  std::mutex gate;
  gate.lock();  // hold the worker inside its first batch
  bool first = true;
  InferenceQueue q(1, [&](std::vector<InferenceRequest>& batch) {
    if (first) {
      first = false;
      std::lock_guard<std::mutex> wait(gate);
    }
    ++executions;
    served += static_cast<int>(batch.size());
    for (auto& r : batch) r.done.set_value();
  });

  std::mt19937_64 rng(5);
  std::vector<std::future<void>> futures;
  futures.push_back(q.submit(request(m, rows(rng, 1, 5))));
  // Wait until the worker has taken the first request, then queue 9 more.
  while (q.pending() != 0) std::this_thread::yield();
  for (int i = 0; i < 9; ++i) futures.push_back(q.submit(request(m, rows(rng, 1, 5))));
  gate.unlock();
  for (auto& f : futures) f.get();
  CHECK(served == 10);
  CHECK(executions == 2);
}

TEST_CASE("InferenceQueue fails pending requests at shutdown")
{
  auto m = mlp(4, 5, 2, 1);
  InferenceQueue q(1, [](std::vector<InferenceRequest>& batch) {
    for (auto& r : batch) r.done.set_value();
  });
  q.shutdown();
  auto f = q.submit(request(m));
  CHECK(orca::testing::thrown([&] { f.get(); }) == "ExecError");
}
