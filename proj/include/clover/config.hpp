#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "clover/pipeline.hpp"

namespace clover {

// Settings are addressed as "section.key", e.g. "fuzz.epsilon".
struct SettingInfo {
  std::string key;
  std::string help;
};

const std::vector<SettingInfo>& setting_catalog();

// Throws InputError for unknown keys or malformed values.
void apply_setting(PipelineConfig& cfg, const std::string& key, const std::string& value);

// Current value of every catalogued setting, formatted so that applying it
// back reproduces the config.
std::map<std::string, std::string> config_settings(const PipelineConfig& cfg);

struct ConfigEntry {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

// INI-like text:
//   # comment
//   [section]
//   key = value
//   [grid]
//   variant.<id> = section.key=value; section.key=value
struct ConfigFile {
  std::vector<ConfigEntry> entries;
  std::vector<Variant> variants;
};

ConfigFile parse_config(const std::string& text);
ConfigFile load_config(const std::filesystem::path& path);
// Errors are reported with the line of the offending entry.
void apply_config(PipelineConfig& cfg, const ConfigFile& file);

// "a=1; b=2" -> {{a,1},{b,2}}
std::vector<std::pair<std::string, std::string>> parse_assignments(const std::string& text);

std::string format_config(const PipelineConfig& cfg);

}  // namespace clover
