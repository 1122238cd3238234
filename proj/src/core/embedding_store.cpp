// Copyright 2026 the emorag authors
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

#include "core/embedding_store.hpp"

#include <cmath>
#include <unordered_set>

#include <json.hpp>

namespace emorag {
namespace {

constexpr char kEmdbMagic[4] = {'E', 'M', 'D', 'B'};

void check_finite(std::span<const float> v, const std::string& id) {
    for (float x : v) {
        if (!std::isfinite(x)) {
            throw Error(ErrorCode::kNonFinite, "record '" + id + "' has a non-finite embedding value");
        }
    }
}

void encode_body(io::ByteWriter& w, std::uint32_t dim, std::span<const UtteranceRecord> records) {
    w.raw(std::string_view(kEmdbMagic, 4));
    w.u32(kEmdbVersion);
    w.u32(dim);
    w.u32(static_cast<std::uint32_t>(records.size()));
    for (const auto& r : records) {
        w.short_string(r.id);
        w.short_string(r.emotion_label);
        w.u8(static_cast<std::uint8_t>(r.intensity));
        w.short_string(r.transcript);
        w.u8(r.audio_ref ? 1 : 0);
        if (r.audio_ref) {
            w.short_string(*r.audio_ref);
        }
        for (float x : r.embedding) {
            w.f32(x);
        }
    }
}

}  // namespace

std::string_view to_string(IntensityLevel level) {
    switch (level) {
        case IntensityLevel::kWeak: return "weak";
        case IntensityLevel::kNormal: return "normal";
        case IntensityLevel::kStrong: return "strong";
    }
    return "unknown";
}

IntensityLevel parse_intensity(std::string_view text) {
    if (text == "weak") return IntensityLevel::kWeak;
    if (text == "normal") return IntensityLevel::kNormal;
    if (text == "strong") return IntensityLevel::kStrong;
    throw Error(ErrorCode::kInvalidArgument,
                "unknown intensity level '" + std::string(text) + "' (expected weak, normal or strong)");
}

EmbeddingDatabase::EmbeddingDatabase(std::uint32_t dim, std::vector<UtteranceRecord> records)
    : dim_(dim), records_(std::move(records)) {
    if (dim_ == 0) {
        throw Error(ErrorCode::kInvalidArgument, "embedding dimension must be positive");
    }
    std::unordered_set<std::string_view> seen;
    seen.reserve(records_.size());
    for (const auto& r : records_) {
        if (r.id.empty()) {
            throw Error(ErrorCode::kInvalidArgument, "record id must be non-empty");
        }
        if (r.emotion_label.empty()) {
            throw Error(ErrorCode::kInvalidArgument, "record '" + r.id + "' has an empty emotion label");
        }
        if (static_cast<std::uint8_t>(r.intensity) > 2) {
            throw Error(ErrorCode::kInvalidArgument, "record '" + r.id + "' has an invalid intensity");
        }
        if (r.embedding.size() != dim_) {
            throw Error(ErrorCode::kDimensionMismatch,
                        "record '" + r.id + "' has " + std::to_string(r.embedding.size()) +
                            " values, database dim is " + std::to_string(dim_));
        }
        check_finite(r.embedding, r.id);
        if (!seen.insert(r.id).second) {
            throw Error(ErrorCode::kDuplicateId, "duplicate record id '" + r.id + "'");
        }
    }
    io::ByteWriter w;
    encode_body(w, dim_, records_);
    fingerprint_ = io::sha256(w.bytes());
}

std::optional<std::size_t> EmbeddingDatabase::find(std::string_view id) const {
    for (std::size_t i = 0; i < records_.size(); ++i) {
        if (records_[i].id == id) return i;
    }
    return std::nullopt;
}

std::vector<std::string> EmbeddingDatabase::labels() const {
    std::vector<std::string> out;
    std::unordered_set<std::string_view> seen;
    for (const auto& r : records_) {
        if (seen.insert(r.emotion_label).second) out.push_back(r.emotion_label);
    }
    return out;
}

bool bit_identical(const EmbeddingDatabase& a, const EmbeddingDatabase& b) {
    return encode_db(a) == encode_db(b);
}

io::Bytes encode_db(const EmbeddingDatabase& db) {
    io::ByteWriter w;
    encode_body(w, db.dim(), db.records());
    return w.take();
}

EmbeddingDatabase decode_db(std::span<const std::uint8_t> bytes) {
    io::ByteReader r(bytes, "EMDB header");
    auto magic = r.raw(4);
    if (!std::equal(magic.begin(), magic.end(), kEmdbMagic)) {
        throw Error(ErrorCode::kMalformedHeader, "not an EMDB file (bad magic)");
    }
    const auto version = r.u32();
    if (version != kEmdbVersion) {
        throw Error(ErrorCode::kMalformedHeader, "unsupported EMDB version " + std::to_string(version));
    }
    const auto dim = r.u32();
    const auto count = r.u32();
    if (dim == 0) {
        throw Error(ErrorCode::kMalformedHeader, "EMDB header declares dim 0");
    }

    io::ByteReader body(bytes.subspan(r.position()), "EMDB record");
    std::vector<UtteranceRecord> records;
    records.reserve(std::min<std::size_t>(count, bytes.size() / (dim * 4 + 7) + 1));
    for (std::uint32_t i = 0; i < count; ++i) {
        UtteranceRecord rec;
        rec.id = body.short_string();
        rec.emotion_label = body.short_string();
        const auto level = body.u8();
        if (level > 2) {
            throw Error(ErrorCode::kMalformedHeader,
                        "record '" + rec.id + "' has intensity byte " + std::to_string(level));
        }
        rec.intensity = static_cast<IntensityLevel>(level);
        rec.transcript = body.short_string();
        const auto has_audio = body.u8();
        if (has_audio > 1) {
            throw Error(ErrorCode::kMalformedHeader, "record '" + rec.id + "' has a bad audio_ref flag");
        }
        if (has_audio) rec.audio_ref = body.short_string();
        if (body.remaining() < std::size_t{dim} * 4) {
            throw Error(ErrorCode::kDimensionMismatch,
                        "record '" + rec.id + "' holds " + std::to_string(body.remaining() / 4) +
                            " floats, header dim is " + std::to_string(dim));
        }
        rec.embedding.resize(dim);
        for (auto& x : rec.embedding) x = body.f32();
        records.push_back(std::move(rec));
    }
    if (!body.at_end()) {
        throw Error(ErrorCode::kMalformedHeader,
                    std::to_string(body.remaining()) + " trailing bytes after the last EMDB record");
    }
    return EmbeddingDatabase(dim, std::move(records));
}

EmbeddingDatabase load_db(const std::filesystem::path& path) {
    return decode_db(io::read_file(path));
}

void save_db(const EmbeddingDatabase& db, const std::filesystem::path& path) {
    io::write_file_atomic(path, encode_db(db));
}

EmbeddingDatabase import_manifest(const std::filesystem::path& path) {
    const auto bytes = io::read_file(path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::kMalformedHeader, "manifest '" + path.string() + "': " + e.what());
    }
    try {
        const nlohmann::json& list = doc.is_array() ? doc : doc.at("records");
        std::optional<std::uint32_t> dim;
        if (doc.is_object() && doc.contains("dim")) dim = doc.at("dim").get<std::uint32_t>();
        std::vector<UtteranceRecord> records;
        for (const auto& item : list) {
            UtteranceRecord rec;
            rec.id = item.at("id").get<std::string>();
            rec.emotion_label = item.at("emotion").get<std::string>();
            rec.intensity = parse_intensity(item.value("intensity", std::string("normal")));
            rec.transcript = item.value("transcript", std::string());
            if (item.contains("audio_ref") && !item.at("audio_ref").is_null()) {
                rec.audio_ref = item.at("audio_ref").get<std::string>();
            }
            for (const auto& v : item.at("embedding")) rec.embedding.push_back(v.get<float>());
            if (!dim) dim = static_cast<std::uint32_t>(rec.embedding.size());
            records.push_back(std::move(rec));
        }
        return EmbeddingDatabase(dim.value_or(EmbeddingDatabase::kDefaultDim), std::move(records));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::kMalformedHeader, "manifest '" + path.string() + "': " + e.what());
    }
}

void export_manifest(const EmbeddingDatabase& db, const std::filesystem::path& path) {
    nlohmann::json records = nlohmann::json::array();
    for (const auto& r : db.records()) {
        nlohmann::json item = {
            {"id", r.id},
            {"emotion", r.emotion_label},
            {"intensity", std::string(to_string(r.intensity))},
            {"transcript", r.transcript},
            {"embedding", r.embedding},
        };
        if (r.audio_ref) item["audio_ref"] = *r.audio_ref;
        records.push_back(std::move(item));
    }
    nlohmann::json doc = {{"dim", db.dim()}, {"records", std::move(records)}};
    io::write_file_atomic(path, doc.dump(1) + "\n");
}

EmbeddingDatabase filter_by_intensity(const EmbeddingDatabase& db, IntensityLevel level) {
    std::vector<UtteranceRecord> subset;
    for (const auto& r : db.records()) {
        if (r.intensity == level) subset.push_back(r);
    }
    return EmbeddingDatabase(db.dim(), std::move(subset));
}

EmotionEmbedding normalize_embedding(std::span<const float> e) {
    double sq = 0.0;
    for (float x : e) {
        if (!std::isfinite(x)) throw Error(ErrorCode::kNonFinite, "cannot normalize a non-finite embedding");
        sq += static_cast<double>(x) * x;
    }
    if (sq == 0.0) throw Error(ErrorCode::kZeroNorm, "cannot normalize a zero-norm embedding");
    const double inv = 1.0 / std::sqrt(sq);
    EmotionEmbedding out(e.size());
    for (std::size_t i = 0; i < e.size(); ++i) out[i] = static_cast<float>(e[i] * inv);
    return out;
}

EmotionEmbedding load_embedding_json(const std::filesystem::path& path) {
    const auto bytes = io::read_file(path);
    try {
        auto doc = nlohmann::json::parse(bytes.begin(), bytes.end());
        const auto& arr = doc.is_object() ? doc.at("embedding") : doc;
        auto e = arr.get<EmotionEmbedding>();
        if (e.empty()) throw Error(ErrorCode::kInvalidArgument, "embedding file '" + path.string() + "' is empty");
        check_finite(e, path.string());
        return e;
    } catch (const nlohmann::json::exception& ex) {
        throw Error(ErrorCode::kMalformedHeader, "embedding file '" + path.string() + "': " + ex.what());
    }
}

void save_embedding_json(std::span<const float> e, const std::filesystem::path& path) {
    nlohmann::json doc = std::vector<float>(e.begin(), e.end());
    io::write_file_atomic(path, doc.dump() + "\n");
}

}  // namespace emorag
