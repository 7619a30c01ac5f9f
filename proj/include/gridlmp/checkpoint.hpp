// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The gridlmp Authors

#pragma once

#include <map>
#include <string>

#include "gridlmp/types.hpp"

namespace gridlmp::nn {

// Text key -> array map with a shape header per entry; format documented in
// docs/checkpoint.md.  Values round-trip exactly (17 significant digits).
void save_checkpoint(const std::string& path,
                     const std::map<std::string, Matrix>& arrays);
std::map<std::string, Matrix> load_checkpoint(const std::string& path);

}  // namespace gridlmp::nn
