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

#include "core/io.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <fstream>
#include <iterator>
#include <system_error>
#include <unistd.h>

namespace emorag::io {

Digest sha256(std::span<const std::uint8_t> data) {
    Digest out{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 ||
        len != out.size()) {
        throw Error(ErrorCode::kInternal, "sha256 digest failed");
    }
    return out;
}

std::string to_hex(const Digest& digest) {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string s;
    s.reserve(digest.size() * 2);
    for (auto b : digest) {
        s.push_back(kHex[b >> 4]);
        s.push_back(kHex[b & 0xF]);
    }
    return s;
}

Bytes read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "' for reading");
    }
    Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) {
        throw Error(ErrorCode::kIo, "read failed for '" + path.string() + "'");
    }
    return data;
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> data) {
    auto tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "' for writing");
        }
        out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
        out.flush();
        if (!out) {
            std::error_code ec;
            std::filesystem::remove(tmp, ec);
            throw Error(ErrorCode::kIo, "write failed for '" + path.string() + "'");
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw Error(ErrorCode::kIo, "cannot rename into '" + path.string() + "'");
    }
}

void write_file_atomic(const std::filesystem::path& path, std::string_view text) {
    write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void ByteWriter::short_string(std::string_view s) {
    if (s.size() > 0xFFFF) {
        throw Error(ErrorCode::kInvalidArgument, "string longer than 65535 bytes cannot be encoded");
    }
    u16(static_cast<std::uint16_t>(s.size()));
    raw(s);
}

void ByteReader::need(std::size_t n) const {
    if (n > remaining()) {
        throw Error(ErrorCode::kMalformedHeader,
                    what_ + ": truncated at byte " + std::to_string(pos_));
    }
}

std::span<const std::uint8_t> ByteReader::raw(std::size_t n) {
    need(n);
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
}

std::string ByteReader::short_string() {
    const auto len = u16();
    auto s = raw(len);
    return {reinterpret_cast<const char*>(s.data()), s.size()};
}

}  // namespace emorag::io
