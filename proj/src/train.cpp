// Copyright 2026 The papool Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "papool/train.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "papool/errors.hpp"
#include "papool/ops.hpp"

namespace papool {

std::size_t default_thread_count() {
  if (const char* env = std::getenv("PAPOOL_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  if (threads == 0) threads = default_thread_count();
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(threads - 1);
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

namespace {

std::size_t argmax_row(std::span<const double> row) {
  return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

struct SampleResult {
  double loss = 0.0;
  bool correct = false;
  std::vector<std::vector<double>> grads;
};

}  // namespace

EpochMetrics train_epoch(Model& model, const Dataset& data, const OptimizerConfig& config, TrainState& state,
                         const TrainOptions& options) {
  config.validate();
  if (data.samples.empty()) throw ValidationError("training set is empty");
  const std::size_t n = data.samples.size();
  const std::size_t epoch = state.epoch;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng shuffle_rng(derive_seed(config.seed, "shuffle", epoch));
  shuffle(order.begin(), order.end(), shuffle_rng);

  auto named = model.named_parameters();
  std::vector<Tensor> params;
  params.reserve(named.size());
  for (auto& [name, t] : named) params.push_back(t);

  const double lr = learning_rate(config, epoch);
  double loss_sum = 0.0;
  std::size_t correct = 0;
  std::vector<SampleResult> results;

  for (std::size_t begin = 0; begin < n; begin += config.batch_size) {
    const std::size_t end = std::min(n, begin + config.batch_size);
    const std::size_t batch = end - begin;
    results.assign(batch, SampleResult{});

    parallel_for(batch, options.threads, [&](std::size_t b) {
      const std::size_t position = epoch * n + begin + b;
      const auto& sample = data.samples[order[begin + b]];
      PointCloud cloud = sample.cloud;
      if (options.augment) {
        cloud = augment(cloud, derive_seed(config.seed, "augment", position), options.augment_options);
      }
      Rng dropout_rng(derive_seed(config.seed, "dropout", position));
      Model local = model.replica();
      ForwardOptions fwd{true, &dropout_rng};
      const Tensor logits = local.forward(cloud, fwd);
      const std::size_t label = sample.label;
      const Tensor loss = cross_entropy(logits, std::span<const std::size_t>(&label, 1));
      scale(loss, 1.0 / static_cast<double>(batch)).backward();

      auto& r = results[b];
      r.loss = loss.item();
      r.correct = argmax_row(logits.data()) == label;
      local.visit("", [&r](const std::string&, Tensor& t) { r.grads.push_back(t.grad()); });
    });

    std::vector<std::vector<double>> grads(params.size());
    for (std::size_t p = 0; p < params.size(); ++p) grads[p].assign(params[p].numel(), 0.0);
    for (const auto& r : results) {
      loss_sum += r.loss;
      correct += r.correct ? 1 : 0;
      for (std::size_t p = 0; p < params.size(); ++p) {
        for (std::size_t j = 0; j < grads[p].size(); ++j) grads[p][j] += r.grads[p][j];
      }
    }
    optimizer_step(params, grads, config, state.optimizer, lr);
    round_to_f32(params, state.optimizer);
  }

  ++state.epoch;
  return EpochMetrics{state.epoch, loss_sum / static_cast<double>(n),
                      static_cast<double>(correct) / static_cast<double>(n)};
}

EvalMetrics metrics_from_predictions(std::span<const std::size_t> labels, std::span<const std::size_t> predictions,
                                     std::size_t classes) {
  if (labels.size() != predictions.size()) throw ContractError("labels and predictions differ in length");
  EvalMetrics m;
  m.confusion.assign(classes, std::vector<std::size_t>(classes, 0));
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= classes || predictions[i] >= classes) throw ValidationError("class index out of range");
    ++m.confusion[labels[i]][predictions[i]];
    hits += labels[i] == predictions[i] ? 1 : 0;
  }
  m.accuracy = labels.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(labels.size());
  m.per_class.assign(classes, 0.0);
  for (std::size_t c = 0; c < classes; ++c) {
    const auto total = std::accumulate(m.confusion[c].begin(), m.confusion[c].end(), std::size_t{0});
    if (total) m.per_class[c] = static_cast<double>(m.confusion[c][c]) / static_cast<double>(total);
  }
  return m;
}

std::vector<std::size_t> predict(const Model& model, const Dataset& data, std::size_t threads) {
  std::vector<std::size_t> out(data.samples.size());
  parallel_for(data.samples.size(), threads, [&](std::size_t i) {
    NoGradGuard no_grad;
    out[i] = argmax_row(model.forward(data.samples[i].cloud).data());
  });
  return out;
}

EvalMetrics evaluate(const Model& model, const Dataset& data, std::size_t threads) {
  const auto predictions = predict(model, data, threads);
  std::vector<std::size_t> labels;
  labels.reserve(data.samples.size());
  for (const auto& s : data.samples) labels.push_back(s.label);
  return metrics_from_predictions(labels, predictions, model.config().classes);
}

nlohmann::json to_json(const EvalMetrics& m) {
  return {{"accuracy", m.accuracy}, {"per_class_accuracy", m.per_class}, {"confusion_matrix", m.confusion}};
}

}  // namespace papool
