#include "contrasum/manifest.hpp"

#include "json.hpp"

#include "contrasum/fsio.hpp"

namespace contrasum {

using nlohmann::json;

void RunManifest::add_output(const std::string& path) {
  outputs.push_back({path, hex64(fnv1a64_file(path))});
}

void RunManifest::write(const std::string& path) const {
  json j;
  j["command"] = command;
  j["tool_version"] = tool_version;
  j["config"] = config;
  j["inputs"] = inputs;
  json outs = json::array();
  for (const Output& o : outputs) {
    outs.push_back({{"path", o.path}, {"content_hash", o.content_hash}});
  }
  j["outputs"] = std::move(outs);
  j["seed"] = seed;
  j["duration_seconds"] = duration_seconds;
  atomic_write_file(path, j.dump(2) + "\n");
}

}  // namespace contrasum
