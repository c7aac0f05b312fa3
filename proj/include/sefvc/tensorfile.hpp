#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace sefvc {

/// On-disk tensor: one JSON header line {"dtype","shape","meta"} followed by
/// raw little-endian payload in row-major order. Features and codebooks use
/// "f32"; checkpoints use "f64" so reload reproduces forwards bit-exactly.
struct TensorFile {
    std::string dtype = "f32";
    std::vector<int64_t> shape;
    nlohmann::json meta = nlohmann::json::object();
    std::vector<double> values;  // always held as double in memory

    int64_t numel() const {
        int64_t n = 1;
        for (int64_t s : shape) n *= s;
        return n;
    }
};

inline void write_tensor(std::ostream& os, const TensorFile& t) {
    if (t.numel() != static_cast<int64_t>(t.values.size()))
        throw std::invalid_argument("tensor shape/value size mismatch");
    nlohmann::json hdr = {{"dtype", t.dtype}, {"shape", t.shape}, {"meta", t.meta}};
    os << hdr.dump() << "\n";
    if (t.dtype == "f32") {
        std::vector<float> buf(t.values.begin(), t.values.end());
        os.write(reinterpret_cast<const char*>(buf.data()), buf.size() * sizeof(float));
    } else if (t.dtype == "f64") {
        os.write(reinterpret_cast<const char*>(t.values.data()), t.values.size() * sizeof(double));
    } else {
        throw std::invalid_argument("unsupported tensor dtype: " + t.dtype);
    }
    if (!os) throw std::runtime_error("tensor write failed");
}

inline TensorFile read_tensor(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("tensor file: missing header");
    nlohmann::json hdr = nlohmann::json::parse(line);
    TensorFile t;
    t.dtype = hdr.at("dtype").get<std::string>();
    t.shape = hdr.at("shape").get<std::vector<int64_t>>();
    if (hdr.contains("meta")) t.meta = hdr["meta"];
    const int64_t n = t.numel();
    if (n < 0) throw std::runtime_error("tensor file: bad shape");
    t.values.resize(static_cast<size_t>(n));
    if (t.dtype == "f32") {
        std::vector<float> buf(static_cast<size_t>(n));
        is.read(reinterpret_cast<char*>(buf.data()), n * sizeof(float));
        if (!is) throw std::runtime_error("tensor file: truncated payload");
        for (int64_t i = 0; i < n; ++i) t.values[i] = buf[i];
    } else if (t.dtype == "f64") {
        is.read(reinterpret_cast<char*>(t.values.data()), n * sizeof(double));
        if (!is) throw std::runtime_error("tensor file: truncated payload");
    } else {
        throw std::runtime_error("tensor file: unsupported dtype " + t.dtype);
    }
    return t;
}

inline void save_tensor(const std::string& path, const TensorFile& t) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write tensor file: " + path);
    write_tensor(f, t);
}

inline TensorFile load_tensor(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open tensor file: " + path);
    return read_tensor(f);
}

}  // namespace sefvc
