// Copyright 2026 The physpref Authors
// SPDX-License-Identifier: Apache-2.0

#include "physpref/tensor_store.hpp"

#include <bit>

#include "physpref/error.hpp"
#include "physpref/io.hpp"

namespace physpref {

namespace {

constexpr std::string_view kMagic = "PPTENS01";
constexpr int kMaxTag = static_cast<int>(Semantics::Pixels);

void put(std::string& out, std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

class Cursor {
public:
    Cursor(std::string_view bytes, const std::string& source) : bytes_(bytes), source_(source) {}

    std::uint64_t get(int n) {
        need(static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + static_cast<std::size_t>(i)])) << (8 * i);
        }
        pos_ += static_cast<std::size_t>(n);
        return v;
    }
    std::string_view take(std::size_t n) {
        need(n);
        const auto s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (remaining() < n) throw ValidationError(source_ + ": truncated tensor store at byte " + std::to_string(pos_));
    }
    std::string_view bytes_;
    std::string source_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_tensors(const TensorMap& tensors) {
    std::string out(kMagic);
    put(out, tensors.size(), 8);
    for (const auto& [name, t] : tensors) {
        put(out, name.size(), 4);
        out += name;
        put(out, static_cast<std::uint64_t>(t.tag()), 1);
        const auto& s = t.shape();
        for (const int e : {s.c, s.t, s.h, s.w}) put(out, static_cast<std::uint64_t>(e), 4);
        for (const double v : t.values()) put(out, std::bit_cast<std::uint64_t>(v), 8);
    }
    return out;
}

TensorMap parse_tensors(std::string_view bytes, const std::string& source) {
    Cursor cur(bytes, source);
    if (cur.take(kMagic.size()) != kMagic) throw ValidationError(source + ": not a tensor store");
    const auto n = cur.get(8);
    TensorMap out;
    for (std::uint64_t i = 0; i < n; ++i) {
        std::string name(cur.take(static_cast<std::size_t>(cur.get(4))));
        const auto tag = static_cast<int>(cur.get(1));
        if (tag > kMaxTag) throw ValidationError(source + ": bad semantics tag on '" + name + "'");
        Shape4 s;
        s.c = static_cast<int>(cur.get(4));
        s.t = static_cast<int>(cur.get(4));
        s.h = static_cast<int>(cur.get(4));
        s.w = static_cast<int>(cur.get(4));
        const std::uint64_t count = static_cast<std::uint64_t>(s.c) * static_cast<std::uint64_t>(s.t) *
                                    static_cast<std::uint64_t>(s.h) * static_cast<std::uint64_t>(s.w);
        if (count > cur.remaining() / 8) throw ValidationError(source + ": tensor '" + name + "' exceeds file size");
        Tensor4 t(s, static_cast<Semantics>(tag));
        for (auto& v : t.values()) v = std::bit_cast<double>(cur.get(8));
        if (!out.emplace(name, std::move(t)).second) throw ValidationError(source + ": duplicate tensor '" + name + "'");
    }
    if (cur.remaining() != 0) throw ValidationError(source + ": trailing bytes after tensor store");
    return out;
}

void write_tensors(const std::filesystem::path& path, const TensorMap& tensors) {
    write_file_atomic(path, serialize_tensors(tensors));
}

TensorMap read_tensors(const std::filesystem::path& path) {
    return parse_tensors(read_text_file(path), path.string());
}

std::string_view tensor_bytes(const Tensor4& t) noexcept {
    return {reinterpret_cast<const char*>(t.data()), t.size() * sizeof(double)};
}

}  // namespace physpref
