#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "actflow/manifest.hpp"
#include "actflow/npy.hpp"

namespace actflow {

struct LayerData {
  std::string name;
  int k = 1;
  Tensor tensor;
};

/// Loaded activation matrices for one dataset. Immutable after loading and
/// safe for concurrent reads. Feedforward: every layer tensor has N rows,
/// one per instance. Recurrent: a single tensor with one row per (instance,
/// time-step), laid out instance-major; `offsets[i]` is the first row of
/// instance i and `offsets[N]` the total row count.
struct ActivationSet {
  Mode mode = Mode::feedforward;
  std::size_t instance_count = 0;
  std::vector<LayerData> layers;           // included layers, manifest order
  std::vector<int> sequence_lengths;       // recurrent only, size N
  std::vector<std::size_t> offsets;        // recurrent only, size N + 1

  std::size_t total_rows() const {
    return mode == Mode::recurrent ? offsets.back() : instance_count;
  }
  int max_length() const;
};

enum class LabelKind { single_class, multi_label };

/// Per-instance true labels with optional predicted labels of the same
/// shape. Single-class tables hold one class index per instance;
/// multi-label tables hold one 0/1 vector of length class_count.
struct LabelTable {
  LabelKind kind = LabelKind::single_class;
  int class_count = 0;
  std::vector<std::string> class_names;
  std::vector<int> true_single;
  std::vector<std::uint8_t> true_multi;    // N * class_count, row-major
  bool has_predictions = false;
  std::vector<int> pred_single;
  std::vector<std::uint8_t> pred_multi;

  std::size_t size() const {
    return kind == LabelKind::single_class
               ? true_single.size()
               : true_multi.size() / static_cast<std::size_t>(class_count);
  }
  bool multi_true(std::size_t i, int label) const {
    return true_multi[i * class_count + label] != 0;
  }
  bool multi_pred(std::size_t i, int label) const {
    return pred_multi[i * class_count + label] != 0;
  }
  int label_index(const std::string& name) const;  // -1 when unknown
};

/// Loads all included layers, validates row counts across layers and, in
/// recurrent mode, builds the per-instance offset table from the lengths
/// file. Non-finite activation values are a hard error.
ActivationSet load_activation_set(const Manifest& manifest);

/// Loads one labels CSV (`index,label` for single-class, `index,<name>...`
/// with 0/1 entries for multi-label).
LabelTable load_labels(const std::filesystem::path& file, std::size_t n,
                       const std::vector<std::string>& class_names);

/// Loads the manifest's labels plus, when present, the predictions file.
LabelTable load_label_table(const Manifest& manifest, std::size_t n);

std::vector<int> load_lengths(const std::filesystem::path& file);

struct TimeSlice {
  std::vector<std::size_t> rows;   // global row index of step t per instance
  std::vector<int> instances;      // matching instance ids, ascending
};

/// Rows holding time-step t, for every instance with T_i > t.
TimeSlice time_slice(const ActivationSet& set, int t);

}  // namespace actflow
