#include "actflow/manifest.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace actflow {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) {
  throw std::runtime_error("manifest: " + msg);
}

const json& require(const json& j, const char* field) {
  if (!j.contains(field)) fail(std::string("missing field '") + field + "'");
  return j.at(field);
}

std::string require_string(const json& j, const char* field) {
  const json& v = require(j, field);
  if (!v.is_string()) fail(std::string("field '") + field + "' must be a string");
  return v.get<std::string>();
}

void check_exists(const std::filesystem::path& p, const std::string& field) {
  if (!std::filesystem::exists(p))
    fail("field '" + field + "': file not found: " + p.string());
}

}  // namespace

const char* to_string(Mode m) {
  return m == Mode::feedforward ? "feedforward" : "recurrent";
}

Mode mode_from_string(const std::string& s) {
  if (s == "feedforward") return Mode::feedforward;
  if (s == "recurrent") return Mode::recurrent;
  fail("field 'mode' must be 'feedforward' or 'recurrent', got '" + s + "'");
}

std::vector<std::size_t> Manifest::included_layers() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < layers.size(); ++i)
    if (layers[i].include) out.push_back(i);
  return out;
}

Manifest load_manifest(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) fail("cannot open " + file.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    fail("parse error in " + file.string() + ": " + e.what());
  }
  if (!j.is_object()) fail("top level must be an object");

  Manifest m;
  m.base_dir = file.has_parent_path() ? file.parent_path()
                                      : std::filesystem::path(".");
  m.name = require_string(j, "name");
  m.mode = mode_from_string(require_string(j, "mode"));

  const json& layers = require(j, "layers");
  if (!layers.is_array() || layers.empty())
    fail("field 'layers' must be a non-empty array");
  std::set<std::string> names;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const json& lj = layers[i];
    std::string at = "layers[" + std::to_string(i) + "]";
    if (!lj.is_object()) fail("field '" + at + "' must be an object");
    LayerSpec spec;
    spec.name = require_string(lj, "name");
    spec.tensor_file = require_string(lj, "tensor_file");
    if (!lj.contains("k") || !lj.at("k").is_number_integer())
      fail("field '" + at + ".k' must be an integer");
    spec.k = lj.at("k").get<int>();
    spec.include = lj.value("include", true);
    if (!names.insert(spec.name).second)
      fail("field '" + at + ".name': duplicate layer name '" + spec.name + "'");
    if (spec.include && spec.k < 1)
      fail("field '" + at + ".k' must be >= 1 for an included layer");
    m.layers.push_back(std::move(spec));
  }
  if (m.included_layers().empty()) fail("no included layers");

  m.labels_file = require_string(j, "labels_file");
  if (j.contains("predictions_file") && !j.at("predictions_file").is_null())
    m.predictions_file = require_string(j, "predictions_file");
  if (j.contains("lengths_file") && !j.at("lengths_file").is_null())
    m.lengths_file = require_string(j, "lengths_file");

  const json& cn = require(j, "class_names");
  if (!cn.is_array() || cn.empty())
    fail("field 'class_names' must be a non-empty array");
  for (const json& c : cn) {
    if (!c.is_string()) fail("field 'class_names' must hold strings");
    m.class_names.push_back(c.get<std::string>());
  }

  if (m.mode == Mode::recurrent) {
    if (m.layers.size() != 1)
      fail("recurrent mode requires exactly one layer spec");
    if (!m.lengths_file)
      fail("recurrent mode requires field 'lengths_file'");
  }

  for (std::size_t i : m.included_layers())
    check_exists(m.resolve(m.layers[i].tensor_file),
                 "layers[" + std::to_string(i) + "].tensor_file");
  check_exists(m.resolve(m.labels_file), "labels_file");
  if (m.predictions_file)
    check_exists(m.resolve(*m.predictions_file), "predictions_file");
  if (m.lengths_file) check_exists(m.resolve(*m.lengths_file), "lengths_file");

  return m;
}

}  // namespace actflow
