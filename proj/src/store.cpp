#include "actflow/store.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace actflow {
namespace {

[[noreturn]] void fail(const std::string& msg) {
  throw std::runtime_error(msg);
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) fail("csv: cannot open " + file.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      std::size_t comma = line.find(',', start);
      std::string f = comma == std::string::npos
                          ? line.substr(start)
                          : line.substr(start, comma - start);
      while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.erase(f.begin());
      while (!f.empty() && (f.back() == ' ' || f.back() == '\t')) f.pop_back();
      fields.push_back(std::move(f));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    rows.push_back(std::move(fields));
  }
  if (rows.empty()) fail("csv: " + file.string() + " is empty");
  return rows;
}

long parse_int(const std::filesystem::path& file, std::size_t row,
               const std::string& s) {
  long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    fail("csv: " + file.string() + " row " + std::to_string(row) +
         ": not an integer: '" + s + "'");
  return v;
}

void check_index_column(const std::filesystem::path& file, std::size_t row,
                        const std::string& s) {
  long v = parse_int(file, row, s);
  if (v != static_cast<long>(row - 1))
    fail("csv: " + file.string() + " row " + std::to_string(row) +
         ": index column is " + std::to_string(v) + ", expected " +
         std::to_string(row - 1) + " (instances are positional)");
}

}  // namespace

int ActivationSet::max_length() const {
  if (sequence_lengths.empty()) return 0;
  return *std::max_element(sequence_lengths.begin(), sequence_lengths.end());
}

int LabelTable::label_index(const std::string& name) const {
  for (std::size_t i = 0; i < class_names.size(); ++i)
    if (class_names[i] == name) return static_cast<int>(i);
  return -1;
}

std::vector<int> load_lengths(const std::filesystem::path& file) {
  auto rows = read_csv(file);
  if (rows[0] != std::vector<std::string>{"index", "length"})
    fail("lengths: " + file.string() + ": header must be 'index,length'");
  std::vector<int> lengths;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != 2)
      fail("lengths: " + file.string() + " row " + std::to_string(r) +
           ": expected 2 columns");
    check_index_column(file, r, rows[r][0]);
    long v = parse_int(file, r, rows[r][1]);
    if (v < 1)
      fail("lengths: " + file.string() + " row " + std::to_string(r) +
           ": length must be >= 1");
    lengths.push_back(static_cast<int>(v));
  }
  return lengths;
}

ActivationSet load_activation_set(const Manifest& manifest) {
  ActivationSet set;
  set.mode = manifest.mode;

  for (std::size_t i : manifest.included_layers()) {
    const LayerSpec& spec = manifest.layers[i];
    LayerData layer;
    layer.name = spec.name;
    layer.k = spec.k;
    layer.tensor = read_tensor(manifest.resolve(spec.tensor_file));
    if (layer.tensor.cols < 1)
      fail("layer '" + spec.name + "': activation dimension must be >= 1");
    for (std::size_t r = 0; r < layer.tensor.rows; ++r)
      for (std::size_t c = 0; c < layer.tensor.cols; ++c)
        if (!std::isfinite(layer.tensor.at(r, c)))
          fail("layer '" + spec.name + "': non-finite value at row " +
               std::to_string(r) + ", column " + std::to_string(c));
    set.layers.push_back(std::move(layer));
  }

  if (manifest.mode == Mode::feedforward) {
    set.instance_count = set.layers.front().tensor.rows;
    for (const LayerData& layer : set.layers)
      if (layer.tensor.rows != set.instance_count)
        fail("layer '" + layer.name + "' has " +
             std::to_string(layer.tensor.rows) + " rows, expected " +
             std::to_string(set.instance_count) +
             " (row counts must match across layers)");
  } else {
    set.sequence_lengths = load_lengths(manifest.resolve(*manifest.lengths_file));
    set.instance_count = set.sequence_lengths.size();
    set.offsets.resize(set.instance_count + 1);
    set.offsets[0] = 0;
    for (std::size_t i = 0; i < set.instance_count; ++i)
      set.offsets[i + 1] =
          set.offsets[i] + static_cast<std::size_t>(set.sequence_lengths[i]);
    std::size_t rows = set.layers.front().tensor.rows;
    if (set.offsets.back() != rows)
      fail("lengths sum to " + std::to_string(set.offsets.back()) +
           " but layer '" + set.layers.front().name + "' has " +
           std::to_string(rows) + " rows");
  }
  return set;
}

LabelTable load_labels(const std::filesystem::path& file, std::size_t n,
                       const std::vector<std::string>& class_names) {
  auto rows = read_csv(file);
  const auto& header = rows[0];
  if (header.empty() || header[0] != "index")
    fail("labels: " + file.string() + ": first header column must be 'index'");

  LabelTable t;
  t.class_names = class_names;
  bool single = header.size() == 2 && header[1] == "label";
  if (single) {
    t.kind = LabelKind::single_class;
    t.class_count = static_cast<int>(class_names.size());
  } else {
    std::vector<std::string> names(header.begin() + 1, header.end());
    if (names != class_names)
      fail("labels: " + file.string() +
           ": header must be 'index,label' or 'index,<class names...>' "
           "matching the manifest class_names");
    t.kind = LabelKind::multi_label;
    t.class_count = static_cast<int>(class_names.size());
  }

  if (rows.size() - 1 != n)
    fail("labels: " + file.string() + ": has " + std::to_string(rows.size() - 1) +
         " rows, expected " + std::to_string(n));

  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& fields = rows[r];
    if (fields.size() != header.size())
      fail("labels: " + file.string() + " row " + std::to_string(r) +
           ": expected " + std::to_string(header.size()) + " columns");
    check_index_column(file, r, fields[0]);
    if (t.kind == LabelKind::single_class) {
      long v = parse_int(file, r, fields[1]);
      if (v < 0 || v >= t.class_count)
        fail("labels: " + file.string() + " row " + std::to_string(r) +
             ": class index " + std::to_string(v) + " out of range [0, " +
             std::to_string(t.class_count) + ")");
      t.true_single.push_back(static_cast<int>(v));
    } else {
      for (std::size_t c = 1; c < fields.size(); ++c) {
        long v = parse_int(file, r, fields[c]);
        if (v != 0 && v != 1)
          fail("labels: " + file.string() + " row " + std::to_string(r) +
               ": multi-label entries must be 0 or 1");
        t.true_multi.push_back(static_cast<std::uint8_t>(v));
      }
    }
  }
  return t;
}

LabelTable load_label_table(const Manifest& manifest, std::size_t n) {
  LabelTable t =
      load_labels(manifest.resolve(manifest.labels_file), n, manifest.class_names);
  if (manifest.predictions_file) {
    LabelTable p = load_labels(manifest.resolve(*manifest.predictions_file), n,
                               manifest.class_names);
    if (p.kind != t.kind)
      fail("predictions: " + manifest.predictions_file->string() +
           ": kind differs from the labels file");
    t.has_predictions = true;
    t.pred_single = std::move(p.true_single);
    t.pred_multi = std::move(p.true_multi);
  }
  return t;
}

TimeSlice time_slice(const ActivationSet& set, int t) {
  if (set.mode != Mode::recurrent)
    fail("time_slice: activation set is not recurrent");
  if (t < 0) fail("time_slice: t must be >= 0");
  TimeSlice slice;
  for (std::size_t i = 0; i < set.instance_count; ++i) {
    if (set.sequence_lengths[i] > t) {
      slice.rows.push_back(set.offsets[i] + static_cast<std::size_t>(t));
      slice.instances.push_back(static_cast<int>(i));
    }
  }
  return slice;
}

}  // namespace actflow
