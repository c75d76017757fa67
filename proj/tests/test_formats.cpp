#include "puree/checkpoint.hpp"
#include "puree/formats.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>
#include <stdexcept>

using namespace puree;
using namespace puree::formats;

namespace {

imaging::RawImage random_raw(int w, int h, std::uint64_t seed) {
    imaging::RawImage img(w, h, 0.0);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& v : img.data) v = static_cast<float>(u(rng));  // exactly representable
    return img;
}

std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("puree_formats_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("PRAW round trip") {
    for (int trial = 0; trial < 5; ++trial) {
        const auto img = random_raw(3 + trial, 7 + 2 * trial, static_cast<std::uint64_t>(trial));
        std::stringstream buf;
        write_praw(buf, img, 12.5);
        const auto back = read_praw(buf);
        CHECK(back.image.width == img.width);
        CHECK(back.image.height == img.height);
        CHECK(back.image.data == img.data);
        CHECK(back.tau_ms == 12.5);
    }
}

TEST_CASE("PRAW header and payload layout") {
    imaging::RawImage img(2, 1, 0.0);
    img.data = {1.0, 0.5, 0.25, 2.0, 0.0, -0.0};
    std::stringstream buf;
    write_praw(buf, img, 10.0);
    const std::string bytes = buf.str();
    const std::string header = "PRAW 1 2 1 3 10\n";
    REQUIRE(bytes.size() == header.size() + 6 * 4);
    CHECK(bytes.substr(0, header.size()) == header);
    // 1.0f little-endian
    CHECK(static_cast<unsigned char>(bytes[header.size() + 3]) == 0x3f);
    CHECK(static_cast<unsigned char>(bytes[header.size() + 2]) == 0x80);
}

TEST_CASE("PRAW rejects malformed input") {
    for (const std::string bad : {"", "PRAX 1 2 2 3 10\n", "PRAW 2 2 2 3 10\n", "PRAW 1 2 2 1 10\n",
                                  "PRAW 1 0 2 3 10\n", "PRAW 1 2 2 3 10\nabc"}) {
        std::istringstream in(bad);
        CHECK_THROWS_AS(read_praw(in), std::runtime_error);
    }
}

TEST_CASE("transmittance files keep the mask") {
    imaging::TransmittanceImage t;
    t.width = 2;
    t.height = 2;
    t.data = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.5, 2.0};
    t.mask = {1, 0, 1, 1};
    std::stringstream buf;
    write_transmittance(buf, t);
    const auto back = read_transmittance(buf);
    CHECK(back.mask == t.mask);
    CHECK(back.at(0, 0, 2) == doctest::Approx(0.3).epsilon(1e-7));
    CHECK(back.at(1, 1, 2) == 2.0);
}

TEST_CASE("PATCH round trip") {
    std::vector<imaging::Patch> patches(3);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<float> u(0.0f, 2.0f);
    for (std::size_t i = 0; i < patches.size(); ++i) {
        patches[i].pixels.resize(imaging::kPatchValues);
        for (auto& v : patches[i].pixels) v = u(rng);
        patches[i].dilution_class = static_cast<int>(i) + 2;
        patches[i].flavor_id = static_cast<int>(i % 2);
    }
    std::stringstream buf;
    write_patches(buf, patches);
    CHECK(buf.str().rfind("PATCH 1 3 25 50 3\n", 0) == 0);
    const auto back = read_patches(buf);
    REQUIRE(back.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(back[i].pixels == patches[i].pixels);
        CHECK(back[i].dilution_class == patches[i].dilution_class);
        CHECK(back[i].flavor_id == patches[i].flavor_id);
    }

    std::istringstream truncated(buf.str().substr(0, buf.str().size() - 1));
    CHECK_THROWS_AS(read_patches(truncated), std::runtime_error);
    std::istringstream wrong_shape("PATCH 1 1 25 25 3\n");
    CHECK_THROWS_AS(read_patches(wrong_shape), std::runtime_error);
}

TEST_CASE("stack directory round trip") {
    imaging::AcquisitionStack s;
    s.normal = random_raw(6, 4, 1);
    s.dark = random_raw(6, 4, 2);
    s.white = random_raw(6, 4, 3);
    s.tau1 = 20.0;
    s.tau2 = 10.0;
    s.mm_per_pixel = 0.25;
    s.label = {"sp8", 0.4, 3};
    const auto dir = scratch_dir("stack");
    write_stack(dir, s);
    for (const char* name : {"normal.praw", "dark.praw", "white.praw", "stack.json"}) {
        CHECK(std::filesystem::exists(dir / name));
    }
    const auto back = read_stack(dir);
    CHECK(back.normal.data == s.normal.data);
    CHECK(back.white.data == s.white.data);
    CHECK(back.tau1 == 20.0);
    CHECK(back.tau2 == 10.0);
    CHECK(back.mm_per_pixel == 0.25);
    CHECK(back.label.flavor == "sp8");
    CHECK(back.label.fraction == 0.4);
    CHECK(back.label.dilution_class == 3);
    CHECK(back.label.to_string() == "sp8_40");

    imaging::SampleLabel label;
    double mm = 0.0;
    CHECK(read_label(dir, label, mm));
    CHECK_FALSE(read_label(dir / "missing", label, mm));
    std::filesystem::remove_all(dir);
}

TEST_CASE("map and profile CSV") {
    imaging::TransmittanceMap map;
    map.width = 2;
    map.height = 2;
    map.percent = {50.0, std::nan(""), 25.0, 75.0};
    map.row_profile = {50.0, 50.0};
    std::ostringstream grid, profile;
    write_map_csv(grid, map);
    write_profile_csv(profile, map);
    CHECK(grid.str() == "50,nan\n25,75\n");
    CHECK(profile.str() == "row,mean_percent\n0,50\n1,50\n");
}

TEST_CASE("NET checkpoint round trip") {
    const auto net = nn::init_network({20, {8, 4}, 3}, 77);
    std::stringstream buf;
    nn::write_checkpoint(buf, net);
    CHECK(buf.str().rfind("NET 1\n", 0) == 0);
    const auto back = nn::read_checkpoint(buf);
    REQUIRE(nn::parameter_count(back) == nn::parameter_count(net));
    auto a = net;
    auto b = back;
    for (std::size_t i = 0; i < nn::parameter_count(net); ++i) CHECK(nn::parameter(a, i) == nn::parameter(b, i));
    CHECK(back.decoder.back().activation == nn::Activation::sigmoid);
    CHECK(back.head.back().activation == nn::Activation::softmax);

    std::istringstream bad("NET 2\n");
    CHECK_THROWS_AS(nn::read_checkpoint(bad), std::runtime_error);
    std::istringstream truncated(buf.str().substr(0, 40));
    CHECK_THROWS_AS(nn::read_checkpoint(truncated), std::runtime_error);
}

TEST_CASE("loss history CSV") {
    const std::vector<double> h{0.5, 0.25};
    std::ostringstream os;
    nn::write_loss_history(os, nn::Phase::finetune, h);
    CHECK(os.str() == "epoch,phase,loss\n1,finetune,0.5\n2,finetune,0.25\n");
}
