#include "puree/config.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace puree::config {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Reads one JSON object and rejects keys that were never asked for.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) fail("must be an object");
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    const json& raw(const std::string& key) {
        if (!j_.contains(key)) fail("missing required key '" + key + "'");
        used_.insert(key);
        return j_.at(key);
    }

    template <class T>
    T get(const std::string& key) {
        const json& v = raw(key);
        try {
            return v.get<T>();
        } catch (const json::exception&) {
            fail("key '" + key + "' has the wrong type");
        }
    }

    template <class T>
    T get(const std::string& key, T fallback) {
        return has(key) ? get<T>(key) : fallback;
    }

    Section child(const std::string& key) { return Section(raw(key), path_ + "." + key); }

    std::string path(const std::string& key) const { return path_ + "." + key; }

    void finish() const {
        for (const auto& item : j_.items()) {
            if (!used_.count(item.key())) fail("unknown key '" + item.key() + "'");
        }
    }

    [[noreturn]] void fail(const std::string& msg) const { throw ConfigError(path_ + ": " + msg); }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> used_;
};

json parse_json(const std::string& text, const std::string& origin) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(origin + ": " + e.what());
    }
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

photonics::Rgb3 rgb3(Section& s, const std::string& key) {
    const auto v = s.get<std::vector<double>>(key);
    if (v.size() != 3) s.fail("'" + key + "' needs exactly 3 channel values");
    return {v[0], v[1], v[2]};
}

PhotonicsConfig parse_photonics(const json& j, const std::string& where) {
    Section s(j, where);
    PhotonicsConfig p;
    p.diluent = s.get<std::string>("diluent", p.diluent);
    p.pure_diluent_concentration = s.get<double>("pure_diluent_concentration", p.pure_diluent_concentration);
    p.fractions = s.get<std::vector<double>>("fractions", p.fractions);
    const json& flavors = s.raw("flavors");
    if (!flavors.is_array() || flavors.empty()) s.fail("'flavors' must be a non-empty array");
    for (std::size_t i = 0; i < flavors.size(); ++i) {
        Section f(flavors[i], s.path("flavors") + "[" + std::to_string(i) + "]");
        Flavor flavor;
        flavor.name = f.get<std::string>("name");
        const json& terms = f.raw("terms");
        if (!terms.is_array() || terms.empty()) f.fail("'terms' must be a non-empty array");
        for (std::size_t k = 0; k < terms.size(); ++k) {
            Section t(terms[k], f.path("terms") + "[" + std::to_string(k) + "]");
            photonics::ChromophoreTerm term;
            term.name = t.get<std::string>("name");
            term.extinction = rgb3(t, "extinction");
            term.concentration = t.get<double>("concentration");
            term.path_length = t.get<double>("path_length");
            t.finish();
            flavor.medium.terms.push_back(std::move(term));
        }
        f.finish();
        p.flavors.push_back(std::move(flavor));
    }
    s.finish();
    return p;
}

nn::TrainConfig parse_train(Section s, nn::Phase phase, nn::TrainConfig cfg) {
    cfg.phase = phase;
    cfg.max_epochs = s.get<int>("epochs", cfg.max_epochs);
    cfg.batch_size = s.get<int>("batch_size", cfg.batch_size);
    cfg.learning_rate = s.get<double>("learning_rate", cfg.learning_rate);
    return cfg;
}

}  // namespace

PipelineConfig parse_config(const std::string& text, const fs::path& base_dir) {
    const json doc = parse_json(text, "config");
    Section root(doc, "config");
    PipelineConfig cfg;

    if (root.get<int>("version") != 1) root.fail("unsupported version (expected 1)");
    cfg.output_dir = root.get<std::string>("output_dir", cfg.output_dir.string());

    const json& photonics = root.raw("photonics");
    if (photonics.is_string()) {
        fs::path ref = photonics.get<std::string>();
        if (ref.is_relative()) ref = base_dir / ref;
        if (!fs::exists(ref)) root.fail("photonics file " + ref.string() + " does not exist");
        cfg.photonics = parse_photonics(parse_json(read_text(ref), ref.string()), ref.string());
    } else {
        cfg.photonics = parse_photonics(photonics, "config.photonics");
    }

    {
        Section g = root.child("geometry");
        cfg.geometry.width = g.get<int>("width");
        cfg.geometry.height = g.get<int>("height");
        cfg.geometry.mm_per_pixel = g.get<double>("mm_per_pixel");
        cfg.roi_mm = g.get<double>("roi_mm", cfg.roi_mm);
        g.finish();
    }
    {
        Section il = root.child("illumination");
        auto& out = cfg.illumination;
        out.white_level = il.get<double>("white_level", out.white_level);
        out.dark_level = il.get<double>("dark_level", out.dark_level);
        out.vignetting = il.get<double>("vignetting", out.vignetting);
        out.tau1 = il.get<double>("tau1_ms", out.tau1);
        out.tau2 = il.get<double>("tau2_ms", out.tau2);
        il.finish();
    }
    {
        Section n = root.child("noise");
        cfg.sigma_read = n.get<double>("sigma_read");
        n.finish();
    }
    cfg.acquisitions = root.get<int>("acquisitions", cfg.acquisitions);
    if (root.has("normalize")) {
        Section n = root.child("normalize");
        cfg.normalize.denom_eps = n.get<double>("denom_eps", cfg.normalize.denom_eps);
        cfg.normalize.t_max = n.get<double>("t_max", cfg.normalize.t_max);
        n.finish();
    }
    {
        Section p = root.child("patches");
        cfg.patches_per_stack = p.get<std::size_t>("per_stack");
        p.finish();
    }
    {
        Section n = root.child("network");
        cfg.encoder_widths = n.get<std::vector<Eigen::Index>>("encoder_widths");
        n.finish();
    }
    {
        Section p = root.child("pretrain");
        cfg.pretrain.patches_per_stack = p.get<std::size_t>("patches_per_stack", cfg.pretrain.patches_per_stack);
        cfg.pretrain.noise = p.get<double>("noise", cfg.pretrain.noise);
        nn::TrainConfig t;
        t.max_epochs = p.get<int>("epochs", t.max_epochs);
        t.batch_size = p.get<int>("batch_size", t.batch_size);
        t.learning_rate = p.get<double>("learning_rate", t.learning_rate);
        t.phase = nn::Phase::pretrain;
        cfg.pretrain.train = t;
        p.finish();
    }
    {
        Section f = root.child("finetune");
        cfg.finetune = parse_train(std::move(f), nn::Phase::finetune, cfg.finetune);
    }
    {
        Section e = root.child("experiment");
        cfg.experiment.flavors = e.get<std::vector<std::string>>("flavors");
        cfg.experiment.train_fraction = e.get<double>("train_fraction", cfg.experiment.train_fraction);
        const json& runs = e.raw("runs");
        if (!runs.is_array() || runs.empty()) e.fail("'runs' must be a non-empty array");
        for (std::size_t i = 0; i < runs.size(); ++i) {
            Section r(runs[i], e.path("runs") + "[" + std::to_string(i) + "]");
            RunConfig run;
            run.id = r.get<std::string>("id");
            run.seed = r.get<std::uint64_t>("seed");
            r.finish();
            cfg.experiment.runs.push_back(std::move(run));
        }
        e.finish();
    }
    {
        Section s = root.child("seeds");
        cfg.seeds.simulate = s.get<std::uint64_t>("simulate");
        cfg.seeds.patches = s.get<std::uint64_t>("patches");
        cfg.seeds.pretrain = s.get<std::uint64_t>("pretrain");
        cfg.seeds.init = s.get<std::uint64_t>("init");
        s.finish();
    }
    root.finish();
    validate(cfg);
    return cfg;
}

PipelineConfig load_config(const fs::path& path) {
    return parse_config(read_text(path), path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

void validate(const PipelineConfig& cfg) {
    const auto require = [](bool ok, const std::string& msg) {
        if (!ok) throw ConfigError(msg);
    };
    std::set<std::string> names;
    for (std::size_t i = 0; i < cfg.photonics.flavors.size(); ++i) {
        const auto& f = cfg.photonics.flavors[i];
        require(!f.name.empty(), "flavor names must be non-empty");
        require(names.insert(f.name).second, "duplicate flavor '" + f.name + "'");
        try {
            photonics::validate(series_for(cfg, i));
        } catch (const std::invalid_argument& e) {
            throw ConfigError("flavor '" + f.name + "': " + e.what());
        }
    }
    require(cfg.geometry.width >= imaging::kPatchSize.cols && cfg.geometry.height >= imaging::kPatchSize.rows,
            "geometry must hold at least one 25x50 patch");
    require(cfg.geometry.mm_per_pixel > 0.0, "mm_per_pixel must be > 0");
    require(cfg.roi_mm > 0.0, "roi_mm must be > 0");
    const double roi_px = std::floor(cfg.roi_mm / cfg.geometry.mm_per_pixel + 1e-9);
    require(roi_px <= cfg.geometry.width && roi_px <= cfg.geometry.height, "ROI larger than the image");
    require(roi_px >= imaging::kPatchSize.cols && roi_px >= imaging::kPatchSize.rows,
            "ROI smaller than one 25x50 patch");
    require(cfg.illumination.tau1 > 0.0 && cfg.illumination.tau2 > 0.0, "exposure times must be > 0");
    require(cfg.illumination.vignetting >= 0.0 && cfg.illumination.vignetting < 1.0,
            "vignetting must lie in [0, 1)");
    require(cfg.illumination.white_level * (1.0 - cfg.illumination.vignetting) > cfg.illumination.dark_level &&
                cfg.illumination.dark_level >= 0.0,
            "white level must exceed dark level");
    require(cfg.sigma_read >= 0.0, "sigma_read must be >= 0");
    require(cfg.acquisitions >= 1, "acquisitions must be >= 1");
    require(cfg.normalize.denom_eps > 0.0 && cfg.normalize.t_max > 0.0, "denom_eps and t_max must be > 0");
    require(cfg.patches_per_stack >= 1, "patches.per_stack must be >= 1");
    require(!cfg.encoder_widths.empty(), "network.encoder_widths must not be empty");
    for (auto w : cfg.encoder_widths) require(w >= 1, "layer widths must be >= 1");
    require(cfg.pretrain.patches_per_stack >= 1, "pretrain.patches_per_stack must be >= 1");
    require(cfg.pretrain.noise >= 0.0, "pretrain.noise must be >= 0");
    for (const auto* t : {&cfg.pretrain.train, &cfg.finetune}) {
        require(t->max_epochs >= 1, "epochs must be >= 1");
        require(t->batch_size >= 1, "batch_size must be >= 1");
        require(t->learning_rate >= 0.0, "learning_rate must be >= 0");
    }
    require(!cfg.experiment.flavors.empty(), "experiment.flavors must not be empty");
    require(cfg.experiment.flavors.size() <= 255, "at most 255 experiment flavors");
    std::set<std::string> used;
    for (const auto& f : cfg.experiment.flavors) {
        require(names.count(f) > 0, "experiment flavor '" + f + "' is not defined under photonics");
        require(used.insert(f).second, "experiment flavor '" + f + "' listed twice");
    }
    require(cfg.experiment.train_fraction > 0.0 && cfg.experiment.train_fraction < 1.0,
            "experiment.train_fraction must lie in (0, 1)");
    const std::size_t stratum = cfg.patches_per_stack * static_cast<std::size_t>(cfg.acquisitions);
    require(stratum >= 5, "each flavor/dilution stratum needs at least 5 patches");
    std::set<std::string> ids;
    for (const auto& r : cfg.experiment.runs) {
        require(!r.id.empty() && r.id != "." && r.id != "..", "run ids must be non-empty names");
        require(std::all_of(r.id.begin(), r.id.end(),
                            [](unsigned char c) { return std::isalnum(c) || c == '_' || c == '-' || c == '.'; }),
                "run id '" + r.id + "' may only use letters, digits, '_', '-' and '.'");
        require(ids.insert(r.id).second, "duplicate run id '" + r.id + "'");
    }
}

void override_seed(PipelineConfig& cfg, std::uint64_t seed) {
    cfg.seeds = {seed, seed + 1, seed + 2, seed + 3};
    for (std::size_t i = 0; i < cfg.experiment.runs.size(); ++i) cfg.experiment.runs[i].seed = seed + 100 + i;
}

photonics::DilutionSeries series_for(const PipelineConfig& cfg, std::size_t flavor_index) {
    const auto& flavor = cfg.photonics.flavors.at(flavor_index);
    photonics::DilutionSeries s;
    s.flavor = flavor.name;
    s.base = flavor.medium;
    s.fractions = cfg.photonics.fractions;
    s.diluent = cfg.photonics.diluent;
    s.pure_diluent_concentration = cfg.photonics.pure_diluent_concentration;
    return s;
}

}  // namespace puree::config
