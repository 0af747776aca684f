#pragma once
// JSON (de)serialization for cube specs, shared by the schema file loader
// and the index manifest.

#include "json.hpp"

#include "cubeqa/schema.hpp"

namespace cubeqa {

nlohmann::json cube_spec_to_json(const CubeSpec& spec);
CubeSpec cube_spec_from_json(const nlohmann::json& j);

}  // namespace cubeqa
