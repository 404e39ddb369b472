// MetaImage (.mhd/.raw, .mha) reader and writer for 3-D scalar volumes.

#include "mht/errors.hpp"
#include "mht/volume.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cmath>
#include <cstring>
#include <limits>
#include <type_traits>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

namespace mht {

namespace {

static_assert(std::endian::native == std::endian::little, "payload I/O assumes a little-endian host");

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<double> parse_reals(const std::string& key, const std::string& text) {
    std::vector<double> out;
    std::istringstream in(text);
    std::string tok;
    while (in >> tok) {
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc() || ptr != tok.data() + tok.size())
            throw ParseError("MetaImage key " + key + ": cannot parse '" + tok + "'");
        out.push_back(v);
    }
    return out;
}

std::size_t element_size(ElementType t) {
    switch (t) {
        case ElementType::Short: return 2;
        case ElementType::Float: return 4;
        case ElementType::Double: return 8;
        case ElementType::UChar: return 1;
    }
    return 0;
}

ElementType parse_element_type(const std::string& s) {
    if (s == "MET_SHORT") return ElementType::Short;
    if (s == "MET_FLOAT") return ElementType::Float;
    if (s == "MET_DOUBLE") return ElementType::Double;
    if (s == "MET_UCHAR") return ElementType::UChar;
    throw UnsupportedElementType("unsupported MetaImage ElementType '" + s + "'");
}

const char* element_type_name(ElementType t) {
    switch (t) {
        case ElementType::Short: return "MET_SHORT";
        case ElementType::Float: return "MET_FLOAT";
        case ElementType::Double: return "MET_DOUBLE";
        case ElementType::UChar: return "MET_UCHAR";
    }
    return "";
}

bool parse_bool(const std::string& v) {
    std::string lower = v;
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    return lower == "true" || lower == "1";
}

template <class T>
void decode(const std::vector<char>& bytes, bool swap, std::vector<double>& out) {
    const std::size_t n = bytes.size() / sizeof(T);
    out.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        char buf[sizeof(T)];
        std::memcpy(buf, bytes.data() + i * sizeof(T), sizeof(T));
        if (swap) std::reverse(buf, buf + sizeof(T));
        T v;
        std::memcpy(&v, buf, sizeof(T));
        out[i] = static_cast<double>(v);
    }
}

std::string format_real(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

}  // namespace

Volume3D load_volume(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());

    std::map<std::string, std::string> header;
    std::string line;
    bool local_payload = false;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            if (trim(line).empty()) continue;
            throw ParseError("malformed MetaImage header line: '" + line + "'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        header[key] = value;
        if (key == "ElementDataFile") {
            local_payload = (value == "LOCAL");
            break;
        }
    }

    auto require = [&](const std::string& key) -> const std::string& {
        const auto it = header.find(key);
        if (it == header.end()) throw ParseError("MetaImage header missing " + key);
        return it->second;
    };

    const auto ndims = parse_reals("NDims", require("NDims"));
    if (ndims.size() != 1 || ndims[0] != 3.0) throw ParseError("only NDims = 3 is supported");

    const auto dim_vals = parse_reals("DimSize", require("DimSize"));
    if (dim_vals.size() != 3) throw ParseError("DimSize must have 3 entries");
    Index3 dims{};
    for (int a = 0; a < 3; ++a) {
        if (dim_vals[a] < 1 || dim_vals[a] != std::floor(dim_vals[a]))
            throw ParseError("DimSize entries must be positive integers");
        dims[a] = static_cast<int>(dim_vals[a]);
    }

    Vec3 spacing(1.0, 1.0, 1.0);
    for (const char* key : {"ElementSpacing", "ElementSize"}) {
        if (auto it = header.find(key); it != header.end()) {
            const auto v = parse_reals(key, it->second);
            if (v.size() != 3) throw ParseError(std::string(key) + " must have 3 entries");
            spacing = Vec3(v[0], v[1], v[2]);
            break;
        }
    }
    Vec3 origin(0.0, 0.0, 0.0);
    for (const char* key : {"Offset", "Origin", "Position"}) {
        if (auto it = header.find(key); it != header.end()) {
            const auto v = parse_reals(key, it->second);
            if (v.size() != 3) throw ParseError(std::string(key) + " must have 3 entries");
            origin = Vec3(v[0], v[1], v[2]);
            break;
        }
    }
    if (auto it = header.find("CompressedData"); it != header.end() && parse_bool(it->second))
        throw ParseError("compressed MetaImage payloads are not supported");
    bool swap = false;
    for (const char* key : {"BinaryDataByteOrderMSB", "ElementByteOrderMSB"})
        if (auto it = header.find(key); it != header.end()) swap = parse_bool(it->second);
    if (auto it = header.find("ElementNumberOfChannels"); it != header.end() && trim(it->second) != "1")
        throw UnsupportedElementType("only scalar (single channel) volumes are supported");

    const ElementType type = parse_element_type(require("ElementType"));
    const std::string data_file = require("ElementDataFile");

    std::vector<char> bytes;
    if (local_payload) {
        bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    } else {
        const std::filesystem::path raw_path = path.parent_path() / data_file;
        std::ifstream raw(raw_path, std::ios::binary);
        if (!raw) throw IoError("cannot open payload " + raw_path.string());
        bytes.assign(std::istreambuf_iterator<char>(raw), std::istreambuf_iterator<char>());
    }

    const std::size_t count = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    const std::size_t esize = element_size(type);
    if (bytes.size() != count * esize) {
        std::ostringstream msg;
        msg << "payload holds " << bytes.size() / esize << " elements (" << bytes.size()
            << " bytes), header expects " << count;
        throw ParseError(msg.str());
    }

    std::vector<double> data;
    switch (type) {
        case ElementType::Short: decode<std::int16_t>(bytes, swap, data); break;
        case ElementType::Float: decode<float>(bytes, swap, data); break;
        case ElementType::Double: decode<double>(bytes, swap, data); break;
        case ElementType::UChar: decode<std::uint8_t>(bytes, swap, data); break;
    }
    try {
        return Volume3D(dims, spacing, origin, std::move(data));
    } catch (const InvalidArgument& e) {
        throw ParseError(std::string("invalid volume: ") + e.what());
    }
}

void save_volume(const Volume3D& vol, const std::filesystem::path& path, ElementType type) {
    std::filesystem::path header_path = path;
    if (header_path.extension() != ".mhd") header_path.replace_extension(".mhd");
    std::filesystem::path raw_path = header_path;
    raw_path.replace_extension(".raw");

    const auto& d = vol.dims();
    const auto& s = vol.spacing();
    const auto& o = vol.origin();
    {
        std::ofstream out(header_path);
        if (!out) throw IoError("cannot write " + header_path.string());
        out << "ObjectType = Image\n"
            << "NDims = 3\n"
            << "BinaryData = True\n"
            << "BinaryDataByteOrderMSB = False\n"
            << "CompressedData = False\n"
            << "DimSize = " << d[0] << ' ' << d[1] << ' ' << d[2] << '\n'
            << "ElementSpacing = " << format_real(s[0]) << ' ' << format_real(s[1]) << ' '
            << format_real(s[2]) << '\n'
            << "Offset = " << format_real(o[0]) << ' ' << format_real(o[1]) << ' ' << format_real(o[2])
            << '\n'
            << "ElementType = " << element_type_name(type) << '\n'
            << "ElementDataFile = " << raw_path.filename().string() << '\n';
        if (!out) throw IoError("failed writing " + header_path.string());
    }

    std::ofstream raw(raw_path, std::ios::binary);
    if (!raw) throw IoError("cannot write " + raw_path.string());
    auto write_all = [&](auto tag) {
        using T = decltype(tag);
        std::vector<T> buf(vol.size());
        std::transform(vol.data().begin(), vol.data().end(), buf.begin(), [](double v) {
            if constexpr (std::is_integral_v<T>) {
                const double lo = static_cast<double>(std::numeric_limits<T>::min());
                const double hi = static_cast<double>(std::numeric_limits<T>::max());
                return static_cast<T>(std::clamp(std::round(v), lo, hi));
            } else {
                return static_cast<T>(v);
            }
        });
        raw.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size() * sizeof(T)));
    };
    switch (type) {
        case ElementType::Short: write_all(std::int16_t{}); break;
        case ElementType::Float: write_all(float{}); break;
        case ElementType::Double: write_all(double{}); break;
        case ElementType::UChar: write_all(std::uint8_t{}); break;
    }
    if (!raw) throw IoError("failed writing " + raw_path.string());
}

}  // namespace mht
