#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace actflow {

enum class Mode { feedforward, recurrent };

const char* to_string(Mode m);
Mode mode_from_string(const std::string& s);

struct LayerSpec {
  std::string name;
  std::filesystem::path tensor_file;
  int k = 1;
  bool include = true;
};

/// Dataset manifest: which activation dumps to load, how many clusters per
/// layer, and where the labels live. Relative paths resolve against the
/// manifest's directory.
struct Manifest {
  std::string name;
  Mode mode = Mode::feedforward;
  std::vector<LayerSpec> layers;
  std::filesystem::path labels_file;
  std::optional<std::filesystem::path> predictions_file;
  std::optional<std::filesystem::path> lengths_file;  // recurrent only
  std::vector<std::string> class_names;
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::filesystem::path& p) const {
    return p.is_absolute() ? p : base_dir / p;
  }
  std::vector<std::size_t> included_layers() const;
};

/// Parses and validates a manifest JSON file. Referenced data files must
/// exist. Violations are reported with the offending field name.
Manifest load_manifest(const std::filesystem::path& file);

}  // namespace actflow
