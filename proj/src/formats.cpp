#include "puree/formats.hpp"

#include "puree/csv.hpp"

#include <json.hpp>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace puree::formats {

namespace fs = std::filesystem;

namespace {

static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559);

void put_f32(std::ostream& out, float v) {
    auto bits = std::bit_cast<std::uint32_t>(v);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
    char bytes[4];
    std::memcpy(bytes, &bits, 4);
    out.write(bytes, 4);
}

void get_f32s(std::istream& in, std::span<float> values) {
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(values.size_bytes()));
    if (in.gcount() != static_cast<std::streamsize>(values.size_bytes())) {
        throw std::runtime_error("truncated float32 payload");
    }
    if constexpr (std::endian::native == std::endian::big) {
        for (float& v : values) {
            v = std::bit_cast<float>(__builtin_bswap32(std::bit_cast<std::uint32_t>(v)));
        }
    }
}

std::string read_header_line(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("missing header line");
    return line;
}

struct PrawHeader {
    int width = 0;
    int height = 0;
    int channels = 0;
    double tau_ms = 0.0;
};

void write_praw_header(std::ostream& out, int w, int h, double tau) {
    out << "PRAW 1 " << w << ' ' << h << ' ' << imaging::kChannels << ' ' << csv::number(tau)
        << '\n';
}

PrawHeader parse_praw_header(std::istream& in) {
    std::istringstream line(read_header_line(in));
    std::string magic;
    int version = 0;
    PrawHeader h;
    if (!(line >> magic >> version >> h.width >> h.height >> h.channels >> h.tau_ms) ||
        magic != "PRAW" || version != 1) {
        throw std::runtime_error("not a PRAW v1 header");
    }
    if (h.width <= 0 || h.height <= 0) throw std::runtime_error("PRAW: bad dimensions");
    if (h.channels != imaging::kChannels) throw std::runtime_error("PRAW: only 3 channels supported");
    return h;
}

std::vector<float> read_payload(std::istream& in, const PrawHeader& h) {
    std::vector<float> raw(static_cast<std::size_t>(h.width) * h.height * h.channels);
    get_f32s(in, raw);
    return raw;
}

nlohmann::json label_json(const imaging::SampleLabel& label, double mm_per_pixel) {
    return {{"flavor", label.flavor},
            {"fraction", label.fraction},
            {"dilution_class", label.dilution_class},
            {"mm_per_pixel", mm_per_pixel}};
}

template <class Fn>
void write_file(const fs::path& path, Fn&& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    body(out);
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::ifstream open_input(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return in;
}

}  // namespace

void write_praw(std::ostream& out, const imaging::RawImage& img, double tau_ms) {
    imaging::validate(img);
    write_praw_header(out, img.width, img.height, tau_ms);
    for (double v : img.data) put_f32(out, static_cast<float>(v));
}

PrawImage read_praw(std::istream& in) {
    const PrawHeader h = parse_praw_header(in);
    const auto raw = read_payload(in, h);
    PrawImage out;
    out.tau_ms = h.tau_ms;
    out.image = imaging::RawImage(h.width, h.height);
    std::copy(raw.begin(), raw.end(), out.image.data.begin());
    imaging::validate(out.image);
    return out;
}

void write_transmittance(std::ostream& out, const imaging::TransmittanceImage& img) {
    write_praw_header(out, img.width, img.height, 1.0);
    for (std::size_t k = 0; k < img.data.size(); ++k) {
        const bool valid = img.mask[k / imaging::kChannels] != 0;
        put_f32(out, valid ? static_cast<float>(img.data[k]) : std::numeric_limits<float>::quiet_NaN());
    }
}

imaging::TransmittanceImage read_transmittance(std::istream& in) {
    const PrawHeader h = parse_praw_header(in);
    const auto raw = read_payload(in, h);
    imaging::TransmittanceImage img;
    img.width = h.width;
    img.height = h.height;
    img.data.assign(raw.size(), 0.0);
    img.mask.assign(static_cast<std::size_t>(h.width) * h.height, 1);
    for (std::size_t px = 0; px < img.mask.size(); ++px) {
        for (int c = 0; c < imaging::kChannels; ++c) {
            const float v = raw[px * imaging::kChannels + c];
            if (!std::isfinite(v)) {
                img.mask[px] = 0;
            } else {
                img.data[px * imaging::kChannels + c] = v;
            }
        }
        if (!img.mask[px]) {
            for (int c = 0; c < imaging::kChannels; ++c) img.data[px * imaging::kChannels + c] = 0.0;
        }
    }
    return img;
}

void write_patches(std::ostream& out, std::span<const imaging::Patch> patches) {
    const auto& s = imaging::kPatchSize;
    out << "PATCH 1 " << patches.size() << ' ' << s.rows << ' ' << s.cols << ' '
        << imaging::kChannels << '\n';
    for (const auto& p : patches) {
        if (p.pixels.size() != imaging::kPatchValues) {
            throw std::invalid_argument("patch does not hold 25x50x3 values");
        }
        if (p.dilution_class < 0 || p.dilution_class > 255 || p.flavor_id < 0 || p.flavor_id > 255) {
            throw std::invalid_argument("patch labels must fit in a byte");
        }
        out.put(static_cast<char>(p.dilution_class));
        out.put(static_cast<char>(p.flavor_id));
        for (float v : p.pixels) put_f32(out, v);
    }
}

std::vector<imaging::Patch> read_patches(std::istream& in) {
    std::istringstream line(read_header_line(in));
    std::string magic;
    int version = 0, rows = 0, cols = 0, channels = 0;
    std::size_t count = 0;
    if (!(line >> magic >> version >> count >> rows >> cols >> channels) || magic != "PATCH" ||
        version != 1) {
        throw std::runtime_error("not a PATCH v1 header");
    }
    if (rows != imaging::kPatchSize.rows || cols != imaging::kPatchSize.cols ||
        channels != imaging::kChannels) {
        throw std::runtime_error("PATCH: only 25x50x3 patches are supported");
    }
    std::vector<imaging::Patch> patches(count);
    for (auto& p : patches) {
        char labels[2];
        if (!in.read(labels, 2)) throw std::runtime_error("PATCH: truncated record");
        p.dilution_class = static_cast<unsigned char>(labels[0]);
        p.flavor_id = static_cast<unsigned char>(labels[1]);
        p.pixels.resize(imaging::kPatchValues);
        get_f32s(in, p.pixels);
    }
    return patches;
}

void write_stack(const fs::path& dir, const imaging::AcquisitionStack& stack) {
    fs::create_directories(dir);
    write_file(dir / "normal.praw", [&](std::ostream& o) { write_praw(o, stack.normal, stack.tau1); });
    write_file(dir / "dark.praw", [&](std::ostream& o) { write_praw(o, stack.dark, stack.tau1); });
    write_file(dir / "white.praw", [&](std::ostream& o) { write_praw(o, stack.white, stack.tau2); });
    write_file(dir / "stack.json", [&](std::ostream& o) {
        o << label_json(stack.label, stack.mm_per_pixel).dump(2) << '\n';
    });
}

bool read_label(const fs::path& dir, imaging::SampleLabel& label, double& mm_per_pixel) {
    const fs::path path = dir / "stack.json";
    if (!fs::exists(path)) return false;
    auto in = open_input(path);
    try {
        const auto j = nlohmann::json::parse(in);
        label.flavor = j.at("flavor").get<std::string>();
        label.fraction = j.at("fraction").get<double>();
        label.dilution_class = j.at("dilution_class").get<int>();
        mm_per_pixel = j.at("mm_per_pixel").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
    return true;
}

imaging::AcquisitionStack read_stack(const fs::path& dir) {
    imaging::AcquisitionStack stack;
    if (!read_label(dir, stack.label, stack.mm_per_pixel)) {
        throw std::runtime_error("missing " + (dir / "stack.json").string());
    }
    const auto load = [&](const char* name) {
        auto in = open_input(dir / name);
        return read_praw(in);
    };
    auto normal = load("normal.praw");
    auto dark = load("dark.praw");
    auto white = load("white.praw");
    stack.normal = std::move(normal.image);
    stack.dark = std::move(dark.image);
    stack.white = std::move(white.image);
    stack.tau1 = normal.tau_ms;
    stack.tau2 = white.tau_ms;
    return stack;
}

void write_map_csv(std::ostream& out, const imaging::TransmittanceMap& map) {
    for (int y = 0; y < map.height; ++y) {
        for (int x = 0; x < map.width; ++x) {
            if (x) out << ',';
            out << csv::number(map.percent[static_cast<std::size_t>(y) * map.width + x]);
        }
        out << '\n';
    }
}

void write_profile_csv(std::ostream& out, const imaging::TransmittanceMap& map) {
    out << "row,mean_percent\n";
    for (int y = 0; y < map.height; ++y) out << y << ',' << csv::number(map.row_profile[y]) << '\n';
}

}  // namespace puree::formats
