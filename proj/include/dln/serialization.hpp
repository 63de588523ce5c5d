#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "dln/circuit.hpp"
#include "dln/compiler.hpp"
#include "dln/data.hpp"
#include "dln/network.hpp"
#include "dln/trainer.hpp"

namespace dln {

// Model and circuit files are JSON documents of the form
//   {"format": "dln-model" | "dln-circuit", "version": "MAJOR.MINOR",
//    "checksum": "<16 hex digits>", "payload": {...}}
// where the checksum is FNV-1a 64 over the compact dump of the payload.
inline constexpr int kFormatMajor = 1;
inline constexpr int kFormatMinor = 0;

std::uint64_t fnv1a64(std::string_view bytes);

nlohmann::json schema_to_json(const Schema& schema);
Schema schema_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const TrainConfig& config);
TrainConfig config_from_json(const nlohmann::json& j);
nlohmann::json params_to_json(const NetworkParams& params);
NetworkParams params_from_json(const nlohmann::json& j);
nlohmann::json circuit_to_json(const HardCircuit& circuit);
HardCircuit circuit_from_json(const nlohmann::json& j);

std::string model_to_text(const Model& model);
Model model_from_text(const std::string& text);
std::string circuit_to_text(const HardCircuit& circuit);
HardCircuit circuit_from_text(const std::string& text);

void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);
void save_circuit(const HardCircuit& circuit, const std::filesystem::path& path);
HardCircuit load_circuit(const std::filesystem::path& path);

/// Whole-file helpers raising IoError.
std::string read_text_file(const std::filesystem::path& path);
/// Writes through a temporary sibling and renames it into place.
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace dln
