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

#include "npcov/dataset.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iterator>

namespace npcov {
namespace {

constexpr std::uint32_t kImageUbyteMagic = 0x00000803;
constexpr std::uint32_t kImageFloatMagic = 0x00000D03;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::vector<unsigned char> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open '" + path + "'");
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    if (in.bad()) fail(ErrorKind::Io, "read failed for '" + path + "'");
    return bytes;
}

void write_file(const std::string& path, const std::vector<unsigned char>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot create '" + path + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorKind::Io, "write failed for '" + path + "'");
}

std::uint32_t be_u32(const std::vector<unsigned char>& b, std::size_t off,
                     const std::string& path) {
    require(off + 4 <= b.size(), ErrorKind::Format, "'" + path + "': truncated header");
    return (std::uint32_t(b[off]) << 24) | (std::uint32_t(b[off + 1]) << 16) |
           (std::uint32_t(b[off + 2]) << 8) | std::uint32_t(b[off + 3]);
}

void push_be_u32(std::vector<unsigned char>& b, std::uint32_t v) {
    b.push_back(static_cast<unsigned char>(v >> 24));
    b.push_back(static_cast<unsigned char>(v >> 16));
    b.push_back(static_cast<unsigned char>(v >> 8));
    b.push_back(static_cast<unsigned char>(v));
}

float be_f32(const unsigned char* p) {
    std::uint32_t u = (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
                      (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
    return std::bit_cast<float>(u);
}

void push_be_f32(std::vector<unsigned char>& b, float v) {
    push_be_u32(b, std::bit_cast<std::uint32_t>(v));
}

struct IdxHeader {
    std::uint32_t magic = 0;
    std::vector<std::size_t> dims;
    std::size_t payload_offset = 0;
    std::size_t count = 1;
};

IdxHeader parse_idx_header(const std::vector<unsigned char>& b, const std::string& path) {
    IdxHeader h;
    h.magic = be_u32(b, 0, path);
    const std::size_t ndim = h.magic & 0xFF;
    for (std::size_t d = 0; d < ndim; ++d) {
        h.dims.push_back(be_u32(b, 4 + 4 * d, path));
        h.count *= h.dims.back();
    }
    h.payload_offset = 4 + 4 * ndim;
    return h;
}

std::string hex_magic(std::uint32_t m) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "0x%08X", m);
    return buf;
}

}  // namespace

Tensor LabeledDataset::image(std::size_t i) const {
    require(i < size(), ErrorKind::Config, "dataset: image index out of range");
    const std::size_t per = example_size();
    std::vector<double> values(images.data() + i * per, images.data() + (i + 1) * per);
    std::vector<std::size_t> shape(images.shape().begin() + 1, images.shape().end());
    return Tensor(std::move(shape), std::move(values));
}

std::size_t LabeledDataset::example_size() const {
    return size() == 0 ? 0 : images.size() / size();
}

void LabeledDataset::check_labels(std::size_t num_classes) const {
    for (std::size_t i = 0; i < labels.size(); ++i) {
        require(labels[i] >= 0 && labels[i] < static_cast<int>(num_classes),
                ErrorKind::Format,
                "dataset: label " + std::to_string(labels[i]) + " at index " +
                    std::to_string(i) + " outside [0, " + std::to_string(num_classes) + ")");
    }
}

LabeledDataset load_dataset(const std::string& image_path, const std::string& label_path) {
    const auto image_bytes = read_file(image_path);
    const auto ih = parse_idx_header(image_bytes, image_path);
    require(ih.magic == kImageUbyteMagic || ih.magic == kImageFloatMagic, ErrorKind::Format,
            "'" + image_path + "': bad image magic " + hex_magic(ih.magic));
    require(ih.dims.size() >= 2, ErrorKind::Format,
            "'" + image_path + "': image file needs at least 2 dimensions");

    std::vector<double> values(ih.count);
    if (ih.magic == kImageUbyteMagic) {
        require(image_bytes.size() == ih.payload_offset + ih.count, ErrorKind::Format,
                "'" + image_path + "': payload size mismatch");
        for (std::size_t i = 0; i < ih.count; ++i) {
            values[i] = image_bytes[ih.payload_offset + i] / 255.0;
        }
    } else {
        require(image_bytes.size() == ih.payload_offset + 4 * ih.count, ErrorKind::Format,
                "'" + image_path + "': payload size mismatch");
        for (std::size_t i = 0; i < ih.count; ++i) {
            values[i] = be_f32(image_bytes.data() + ih.payload_offset + 4 * i);
        }
    }

    const auto label_bytes = read_file(label_path);
    const auto lh = parse_idx_header(label_bytes, label_path);
    require(lh.magic == kLabelMagic, ErrorKind::Format,
            "'" + label_path + "': bad label magic " + hex_magic(lh.magic));
    require(label_bytes.size() == lh.payload_offset + lh.count, ErrorKind::Format,
            "'" + label_path + "': payload size mismatch");
    require(lh.dims.size() == 1 && lh.dims[0] == ih.dims[0], ErrorKind::Format,
            "label count " + std::to_string(lh.count) + " != image count " +
                std::to_string(ih.dims[0]));

    LabeledDataset ds;
    if (ih.dims[0] > 0) ds.images = Tensor(ih.dims, std::move(values));
    ds.labels.reserve(lh.count);
    for (std::size_t i = 0; i < lh.count; ++i) {
        ds.labels.push_back(label_bytes[lh.payload_offset + i]);
    }
    require(ds.images.all_finite(), ErrorKind::Format,
            "'" + image_path + "': non-finite pixel values");
    return ds;
}

void save_dataset(const LabeledDataset& dataset, const std::string& image_path,
                  const std::string& label_path, bool as_float) {
    require(dataset.images.rank() >= 2, ErrorKind::Config,
            "save_dataset: image tensor must be [N, dims...]");
    require(dataset.images.extent(0) == dataset.size(), ErrorKind::Config,
            "save_dataset: image/label count mismatch");

    std::vector<unsigned char> image_bytes;
    // Magic encodes element type and the rank actually carried.
    push_be_u32(image_bytes, ((as_float ? 0x0Du : 0x08u) << 8) |
                                 static_cast<std::uint32_t>(dataset.images.rank()));
    for (std::size_t d = 0; d < dataset.images.rank(); ++d) {
        push_be_u32(image_bytes, static_cast<std::uint32_t>(dataset.images.extent(d)));
    }
    for (double v : dataset.images.values()) {
        if (as_float) {
            push_be_f32(image_bytes, static_cast<float>(v));
        } else {
            require(v >= 0.0 && v <= 1.0, ErrorKind::Config,
                    "save_dataset: byte images need values in [0,1]");
            image_bytes.push_back(static_cast<unsigned char>(std::lround(v * 255.0)));
        }
    }
    write_file(image_path, image_bytes);

    std::vector<unsigned char> label_bytes;
    push_be_u32(label_bytes, kLabelMagic);
    push_be_u32(label_bytes, static_cast<std::uint32_t>(dataset.size()));
    for (int label : dataset.labels) {
        require(label >= 0 && label <= 255, ErrorKind::Config,
                "save_dataset: labels must fit in a byte");
        label_bytes.push_back(static_cast<unsigned char>(label));
    }
    write_file(label_path, label_bytes);
}

}  // namespace npcov
