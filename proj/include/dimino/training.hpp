#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dimino/dataset.hpp"
#include "dimino/metrics.hpp"
#include "dimino/model.hpp"

namespace dimino {

struct TrainConfig {
  MetricKind loss = MetricKind::kRelH1;
  std::size_t epochs = 200;
  std::size_t batch_size = 16;
  double lr = 1e-3;
  std::size_t warmup_epochs = 5;
  std::size_t patience = 30;  // epochs without a better valid rel-L2; 0 disables
  double valid_fraction = 0.1;
  std::uint64_t seed = 0;
  Precision precision = Precision::kF64;
  void validate() const;
};

// Linear warmup to lr over warmup_epochs, then cosine decay to zero at the
// last epoch.
double scheduled_lr(const TrainConfig& cfg, std::size_t epoch);

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::size_t step = 0;
};

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One bias-corrected Adam update over the trainable parameters; grads holds
// one buffer per parameter (empty for buffers).
void adam_step(std::span<Parameter> params, const std::vector<std::vector<double>>& grads, AdamState& state,
               double lr, const AdamOptions& options = {});

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0;
  double train_loss = 0;
  double valid_rel_l2 = 0;
  double valid_rel_h1 = 0;
  double valid_rel_l1 = 0;
};

std::string epoch_record_json(const EpochRecord& r);

struct TrainResult {
  Model best;
  std::size_t best_epoch = 0;
  std::vector<EpochRecord> history;
};

// Deterministic train/valid partition of the training split.
struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> valid;
};
SplitIndices carve_validation(std::size_t count, double valid_fraction, std::uint64_t seed);

// Per-sample loss and parameter gradients (double buffers, one per model
// parameter, empty for buffers).
struct SampleGradient {
  double loss = 0;
  std::vector<std::vector<double>> grads;
};
SampleGradient sample_gradient(const Model& model, const Sample& sample, MetricKind loss, Precision precision);

// Samples in a batch run in parallel; their gradients are reduced in sample
// order, so results do not depend on the thread count.
TrainResult train(Model model, const std::vector<Sample>& samples, const TrainConfig& cfg,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

struct MetricTable {
  std::string model;
  std::size_t count = 0;
  double rel_l2 = 0;
  double rel_h1 = 0;
  double rel_l1 = 0;
};

MetricTable evaluate(const Model& model, const std::vector<Sample>& samples, Precision precision = Precision::kF64);
MetricTable evaluate(const Model& model, const Dataset& dataset, std::string_view split,
                     Precision precision = Precision::kF64);

// (base - score) / base
double gain(double base, double score);

// Rows of scores in units of 1e-2; with a baseline row, the other rows get
// a gain column on rel-L2.
std::string format_metric_tables(const std::vector<MetricTable>& rows, const MetricTable* baseline = nullptr);
std::string metric_tables_json(const std::vector<MetricTable>& rows, const MetricTable* baseline = nullptr);

}  // namespace dimino
