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

#include "npcov/model_io.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <iterator>

#include <json.hpp>

namespace npcov {
namespace {

using ordered_json = nlohmann::ordered_json;

constexpr int kManifestVersion = 1;

std::string layer_label(std::size_t index, const std::string& kind) {
    return "layer " + std::to_string(index) + " (" + kind + ")";
}

std::vector<unsigned char> read_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open '" + path + "'");
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    if (in.bad()) fail(ErrorKind::Io, "read failed for '" + path + "'");
    return bytes;
}

ordered_json tensor_entry(const Tensor& t, std::size_t& offset) {
    ordered_json e;
    e["shape"] = t.shape();
    e["offset"] = offset;
    e["count"] = t.size();
    offset += 4 * t.size();
    return e;
}

Tensor read_tensor(const ordered_json& entry, const std::vector<unsigned char>& blob,
                   const std::string& label, const std::string& field) {
    const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
    const auto offset = entry.at("offset").get<std::size_t>();
    const auto count = entry.at("count").get<std::size_t>();
    require(Tensor::checked_size(shape) == count, ErrorKind::Format,
            label + ": " + field + " count " + std::to_string(count) +
                " does not match shape " + shape_string(shape));
    require(offset % 4 == 0, ErrorKind::Format, label + ": misaligned " + field + " offset");
    require(offset + 4 * count <= blob.size(), ErrorKind::Format,
            "weight blob truncated in " + label + " " + field);
    std::vector<double> values(count);
    for (std::size_t i = 0; i < count; ++i) {
        const unsigned char* p = blob.data() + offset + 4 * i;
        const std::uint32_t u = std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) |
                                (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
        values[i] = static_cast<double>(std::bit_cast<float>(u));
    }
    return Tensor(shape, std::move(values));
}

void append_tensor(std::vector<unsigned char>& blob, const Tensor& t) {
    for (double v : t.values()) {
        const std::uint32_t u = std::bit_cast<std::uint32_t>(static_cast<float>(v));
        blob.push_back(static_cast<unsigned char>(u));
        blob.push_back(static_cast<unsigned char>(u >> 8));
        blob.push_back(static_cast<unsigned char>(u >> 16));
        blob.push_back(static_cast<unsigned char>(u >> 24));
    }
}

}  // namespace

Model load_model(const std::string& manifest_path, const std::string& blob_path) {
    std::ifstream in(manifest_path);
    if (!in) fail(ErrorKind::Io, "cannot open '" + manifest_path + "'");
    ordered_json manifest;
    try {
        manifest = ordered_json::parse(in);
    } catch (const std::exception& e) {
        fail(ErrorKind::Format, "'" + manifest_path + "': " + e.what());
    }

    try {
        const int version = manifest.at("version").get<int>();
        require(version == kManifestVersion, ErrorKind::Format,
                "unsupported manifest version " + std::to_string(version) +
                    " (expected " + std::to_string(kManifestVersion) + ")");
        const auto input_shape = manifest.at("input_shape").get<std::vector<std::size_t>>();
        const auto num_classes = manifest.at("num_classes").get<std::size_t>();

        const auto blob = read_binary(blob_path);
        std::size_t expected_end = 0;

        std::vector<Layer> layers;
        for (std::size_t i = 0; i < manifest.at("layers").size(); ++i) {
            const ordered_json& e = manifest["layers"][i];
            const std::string kind_name = e.at("kind").get<std::string>();
            const LayerKind kind = layer_kind_from_string(kind_name);
            const std::string label = layer_label(i, kind_name);
            switch (kind) {
                case LayerKind::Dense: {
                    require(e.at("weights").at("offset").get<std::size_t>() == expected_end,
                            ErrorKind::Format, label + ": weights offset out of order");
                    Tensor w = read_tensor(e.at("weights"), blob, label, "weights");
                    expected_end += 4 * w.size();
                    require(e.at("bias").at("offset").get<std::size_t>() == expected_end,
                            ErrorKind::Format, label + ": bias offset out of order");
                    Tensor b = read_tensor(e.at("bias"), blob, label, "bias");
                    expected_end += 4 * b.size();
                    layers.push_back(Layer::dense(std::move(w), std::move(b)));
                    break;
                }
                case LayerKind::Conv2d: {
                    require(e.at("weights").at("offset").get<std::size_t>() == expected_end,
                            ErrorKind::Format, label + ": weights offset out of order");
                    Tensor w = read_tensor(e.at("weights"), blob, label, "weights");
                    expected_end += 4 * w.size();
                    require(e.at("bias").at("offset").get<std::size_t>() == expected_end,
                            ErrorKind::Format, label + ": bias offset out of order");
                    Tensor b = read_tensor(e.at("bias"), blob, label, "bias");
                    expected_end += 4 * b.size();
                    layers.push_back(Layer::conv2d(std::move(w), std::move(b),
                                                   e.at("stride").get<int>(),
                                                   e.at("padding").get<int>()));
                    break;
                }
                case LayerKind::Relu:
                    layers.push_back(Layer::relu());
                    break;
                case LayerKind::Flatten:
                    layers.push_back(Layer::flatten());
                    break;
                case LayerKind::MaxPool2d:
                    layers.push_back(Layer::max_pool2d(e.at("kernel").get<int>(),
                                                       e.at("stride").get<int>()));
                    break;
            }
        }
        require(expected_end == blob.size(), ErrorKind::Format,
                "'" + blob_path + "': blob length " + std::to_string(blob.size()) +
                    " does not match manifest extent " + std::to_string(expected_end));
        return Model(input_shape, std::move(layers), num_classes);
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        fail(ErrorKind::Format, "'" + manifest_path + "': " + e.what());
    }
}

void save_model(const Model& model, const std::string& manifest_path,
                const std::string& blob_path) {
    ordered_json manifest;
    manifest["version"] = kManifestVersion;
    manifest["input_shape"] = model.input_shape();
    manifest["num_classes"] = model.num_classes();
    manifest["layers"] = ordered_json::array();

    std::vector<unsigned char> blob;
    std::size_t offset = 0;
    for (const Layer& layer : model.layers()) {
        ordered_json e;
        e["kind"] = to_string(layer.kind);
        switch (layer.kind) {
            case LayerKind::Dense:
                e["weights"] = tensor_entry(layer.weights, offset);
                e["bias"] = tensor_entry(layer.bias, offset);
                append_tensor(blob, layer.weights);
                append_tensor(blob, layer.bias);
                break;
            case LayerKind::Conv2d:
                e["stride"] = layer.stride;
                e["padding"] = layer.padding;
                e["weights"] = tensor_entry(layer.weights, offset);
                e["bias"] = tensor_entry(layer.bias, offset);
                append_tensor(blob, layer.weights);
                append_tensor(blob, layer.bias);
                break;
            case LayerKind::MaxPool2d:
                e["kernel"] = layer.kernel;
                e["stride"] = layer.stride;
                break;
            case LayerKind::Relu:
            case LayerKind::Flatten:
                break;
        }
        manifest["layers"].push_back(std::move(e));
    }

    std::ofstream mout(manifest_path, std::ios::trunc);
    if (!mout) fail(ErrorKind::Io, "cannot create '" + manifest_path + "'");
    mout << manifest.dump(2) << '\n';
    if (!mout) fail(ErrorKind::Io, "write failed for '" + manifest_path + "'");

    std::ofstream bout(blob_path, std::ios::binary | std::ios::trunc);
    if (!bout) fail(ErrorKind::Io, "cannot create '" + blob_path + "'");
    bout.write(reinterpret_cast<const char*>(blob.data()),
               static_cast<std::streamsize>(blob.size()));
    if (!bout) fail(ErrorKind::Io, "write failed for '" + blob_path + "'");
}

}  // namespace npcov
