// Copyright 2026 The npcov Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <string>

#include "npcov/model.hpp"

namespace npcov {

/// Model files: a structured-text manifest describing layer kinds, shapes
/// and blob offsets, plus a blob of little-endian float32 values in
/// manifest order. save(load(m, b)) reproduces both files byte-for-byte.
Model load_model(const std::string& manifest_path, const std::string& blob_path);
void save_model(const Model& model, const std::string& manifest_path,
                const std::string& blob_path);

}  // namespace npcov
