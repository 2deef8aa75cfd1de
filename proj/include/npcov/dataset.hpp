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
#include <vector>

#include "npcov/tensor.hpp"

namespace npcov {

/// Images plus integer labels. Image tensor shape is [N, d1, d2, ...];
/// labels has length N.
struct LabeledDataset {
    Tensor images;
    std::vector<int> labels;
    std::string split;

    std::size_t size() const { return labels.size(); }
    /// Extracts image i with the per-example shape (leading axis dropped).
    Tensor image(std::size_t i) const;
    /// Per-example element count.
    std::size_t example_size() const;
    /// Rejects labels outside [0, num_classes).
    void check_labels(std::size_t num_classes) const;
};

/// Reads an IDX image/label file pair. Unsigned-byte images (magic
/// 0x00000803) are scaled to [0,1]; float32 images (magic 0x00000D03,
/// big-endian payload) are taken as-is. Labels must be unsigned-byte
/// (magic 0x00000801).
LabeledDataset load_dataset(const std::string& image_path, const std::string& label_path);

/// Writes the IDX pair. With as_float the image payload is big-endian
/// float32 and values are written unscaled; otherwise values must lie in
/// [0,1] and are quantized to bytes.
void save_dataset(const LabeledDataset& dataset, const std::string& image_path,
                  const std::string& label_path, bool as_float = false);

}  // namespace npcov
