#include <cstring>
#include <fstream>
#include <iterator>

#include "dalsh/harness.hpp"

namespace dalsh {

namespace {

std::vector<char> slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open " + path);
    }
    return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// Walks the (int32 d, d 4-byte values) records and calls emit(offset, d, payload).
template <typename Emit>
void walk_records(const std::vector<char>& bytes, const std::string& path, Emit emit) {
    std::size_t off = 0;
    std::int32_t first = 0;
    while (off < bytes.size()) {
        if (bytes.size() - off < 4) {
            throw Error(path + ": truncated record header at byte offset " + std::to_string(off));
        }
        std::int32_t d = 0;
        std::memcpy(&d, bytes.data() + off, 4);
        if (d <= 0) {
            throw Error(path + ": non-positive dimension " + std::to_string(d) + " at byte offset " +
                        std::to_string(off));
        }
        if (first == 0) {
            first = d;
        } else if (d != first) {
            throw Error(path + ": dimension " + std::to_string(d) + " differs from " + std::to_string(first) +
                        " at byte offset " + std::to_string(off));
        }
        const std::size_t need = 4 * static_cast<std::size_t>(d);
        if (bytes.size() - off - 4 < need) {
            throw Error(path + ": truncated record at byte offset " + std::to_string(off));
        }
        emit(off, static_cast<std::size_t>(d), bytes.data() + off + 4);
        off += 4 + need;
    }
}

void spill(const std::string& path, const std::vector<char>& bytes) {
    std::ofstream out(path, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw Error("cannot write " + path);
    }
}

template <typename T>
void append(std::vector<char>& bytes, T v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    bytes.insert(bytes.end(), p, p + sizeof(T));
}

} // namespace

Dataset read_fvecs(const std::string& path) {
    const std::vector<char> bytes = slurp(path);
    std::size_t dim = 0;
    std::vector<double> rows;
    walk_records(bytes, path, [&](std::size_t off, std::size_t d, const char* payload) {
        dim = d;
        for (std::size_t j = 0; j < d; ++j) {
            float f = 0.0f;
            std::memcpy(&f, payload + 4 * j, 4);
            if (!std::isfinite(f)) {
                throw Error(path + ": non-finite value in record at byte offset " + std::to_string(off));
            }
            rows.push_back(static_cast<double>(f));
        }
    });
    if (dim == 0) {
        return Dataset();
    }
    return Dataset(dim, std::move(rows));
}

void write_fvecs(const std::string& path, const Dataset& data) {
    std::vector<char> bytes;
    bytes.reserve(data.size() * (4 + 4 * data.dim()));
    for (std::size_t i = 0; i < data.size(); ++i) {
        append<std::int32_t>(bytes, static_cast<std::int32_t>(data.dim()));
        for (double v : data.point(i)) {
            append<float>(bytes, static_cast<float>(v));
        }
    }
    spill(path, bytes);
}

std::vector<std::vector<std::int32_t>> read_ivecs(const std::string& path) {
    const std::vector<char> bytes = slurp(path);
    std::vector<std::vector<std::int32_t>> rows;
    walk_records(bytes, path, [&](std::size_t, std::size_t d, const char* payload) {
        std::vector<std::int32_t> row(d);
        std::memcpy(row.data(), payload, 4 * d);
        rows.push_back(std::move(row));
    });
    return rows;
}

void write_ivecs(const std::string& path, const std::vector<std::vector<std::int32_t>>& rows) {
    std::vector<char> bytes;
    for (const auto& row : rows) {
        if (row.empty()) {
            throw Error("ivecs rows must be non-empty");
        }
        append<std::int32_t>(bytes, static_cast<std::int32_t>(row.size()));
        for (std::int32_t v : row) {
            append<std::int32_t>(bytes, v);
        }
    }
    spill(path, bytes);
}

} // namespace dalsh
