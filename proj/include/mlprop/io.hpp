#ifndef MLPROP_IO_HPP
#define MLPROP_IO_HPP

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mlprop/errors.hpp"
#include "mlprop/grid.hpp"

namespace mlprop {

// Field file format "MLF1":
//   bytes 0..3   magic 'M' 'L' 'F' '1'
//   bytes 4..7   little-endian u32 header length L
//   L bytes      UTF-8 JSON header
//   payload      product(shape) little-endian f64 values, row-major
namespace detail {

inline void put_u32le(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

inline std::uint32_t get_u32le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline bool host_is_little_endian() {
    const std::uint32_t x = 1;
    unsigned char b;
    std::memcpy(&b, &x, 1);
    return b == 1;
}

} // namespace detail

inline std::string encode_field(const SampledField& field) {
    field.validate();
    nlohmann::ordered_json header;
    header["shape"] = field.grid.shape;
    header["spacing"] = field.grid.spacing;
    header["origin"] = field.grid.origin;
    header["dtype"] = "f64le";
    header["order"] = "row-major";
    header["support_margin"] = field.support_margin;
    const std::string hj = header.dump();

    std::string out;
    out.reserve(8 + hj.size() + 8 * field.values.size());
    out += "MLF1";
    detail::put_u32le(out, static_cast<std::uint32_t>(hj.size()));
    out += hj;
    if (detail::host_is_little_endian()) {
        out.append(reinterpret_cast<const char*>(field.values.data()),
                   8 * field.values.size());
    } else {
        for (double v : field.values) {
            char buf[8];
            std::memcpy(buf, &v, 8);
            std::reverse(buf, buf + 8);
            out.append(buf, 8);
        }
    }
    return out;
}

inline SampledField decode_field(const std::string& bytes) {
    if (bytes.size() < 8 || bytes.compare(0, 4, "MLF1") != 0)
        throw io_error("field file: bad magic");
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    const std::uint32_t hlen = detail::get_u32le(p + 4);
    if (bytes.size() < 8 + static_cast<std::size_t>(hlen))
        throw io_error("field file: truncated header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.substr(8, hlen));
    } catch (const nlohmann::json::exception& e) {
        throw io_error(std::string("field file: malformed header: ") + e.what());
    }

    SampledField field;
    try {
        field.grid.shape = header.at("shape").get<std::vector<index_t>>();
        field.grid.spacing = header.at("spacing").get<std::vector<double>>();
        field.grid.origin = header.at("origin").get<std::vector<double>>();
        field.support_margin = header.at("support_margin").get<index_t>();
        if (header.at("dtype").get<std::string>() != "f64le")
            throw io_error("field file: unsupported dtype");
        if (header.at("order").get<std::string>() != "row-major")
            throw io_error("field file: unsupported layout order");
    } catch (const nlohmann::json::exception& e) {
        throw io_error(std::string("field file: malformed header: ") + e.what());
    }
    field.grid.validate();

    const std::size_t count = field.grid.cell_count();
    const std::size_t payload = bytes.size() - 8 - hlen;
    if (payload < 8 * count) throw io_error("field file: truncated payload");
    if (payload > 8 * count)
        throw io_error("field file: header/payload size mismatch");
    field.values.resize(count);
    if (detail::host_is_little_endian()) {
        std::memcpy(field.values.data(), bytes.data() + 8 + hlen, 8 * count);
    } else {
        for (std::size_t i = 0; i < count; ++i) {
            char buf[8];
            std::memcpy(buf, bytes.data() + 8 + hlen + 8 * i, 8);
            std::reverse(buf, buf + 8);
            std::memcpy(&field.values[i], buf, 8);
        }
    }
    field.validate();
    return field;
}

inline void write_field(const SampledField& field, const std::string& path) {
    const std::string bytes = encode_field(field);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("field file: cannot open for writing: " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw io_error("field file: write failed: " + path);
}

inline SampledField read_field(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("field file: cannot open: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return decode_field(ss.str());
}

// WavefrontSet CSV: x1,x2,theta_rad,decay_order,log_constant,singular
inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_wavefront_csv(const WavefrontSet& wf, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("wavefront csv: cannot open for writing: " + path);
    out << "x1,x2,theta_rad,decay_order,log_constant,singular\n";
    for (const auto& s : wf.samples) {
        out << format_double(s.x[0]) << ',' << format_double(s.x[1]) << ','
            << format_double(s.theta.angle()) << ',' << format_double(s.decay_order)
            << ',' << format_double(s.log_constant) << ',' << (s.singular ? 1 : 0)
            << '\n';
    }
    if (!out) throw io_error("wavefront csv: write failed: " + path);
}

inline WavefrontSet read_wavefront_csv(const std::string& path,
                                       GridSpec position_grid = {},
                                       index_t direction_count = 0) {
    std::ifstream in(path);
    if (!in) throw io_error("wavefront csv: cannot open: " + path);
    std::string line;
    if (!std::getline(in, line) ||
        line != "x1,x2,theta_rad,decay_order,log_constant,singular")
        throw io_error("wavefront csv: bad header line");
    WavefrontSet wf;
    wf.position_grid = std::move(position_grid);
    wf.direction_count = direction_count;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string tok;
        double vals[5];
        int singular = 0;
        for (int i = 0; i < 5; ++i) {
            if (!std::getline(ss, tok, ',')) throw io_error("wavefront csv: short row");
            vals[i] = std::stod(tok);
        }
        if (!std::getline(ss, tok, ',')) throw io_error("wavefront csv: short row");
        singular = std::stoi(tok);
        PhaseSpaceSample s;
        s.x = {vals[0], vals[1]};
        s.theta = Direction::normalized({std::cos(vals[2]), std::sin(vals[2])});
        s.decay_order = vals[3];
        s.log_constant = vals[4];
        s.singular = singular != 0;
        wf.samples.push_back(std::move(s));
    }
    return wf;
}

} // namespace mlprop

#endif
