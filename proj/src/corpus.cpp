#include "mqc/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <unordered_map>

#include "json.hpp"

#include "mqc/mask_metrics.hpp"
#include "mqc/rng.hpp"
#include "mqc/volume_io.hpp"

namespace mqc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct BlobStyle {
    double intensity;
    double rz_lo, rz_hi;
    double rp_lo, rp_hi; // in-plane radius range
    bool attach_to_previous;
};

// Two intensity bands are shared between classes of different size, so the
// class identity carries information the pixels alone do not.
const BlobStyle kPalette[5] = {
    {60.0, 7.0, 9.0, 15.0, 20.0, false},
    {60.0, 3.5, 5.0, 8.0, 11.0, true},
    {25.0, 4.0, 5.5, 9.0, 12.0, false},
    {25.0, 2.0, 3.0, 4.5, 6.5, true},
    {-40.0, 1.8, 2.6, 3.5, 5.5, false},
};

struct Blob {
    double cz, cy, cx;
    double rz, ry, rx;
};

bool inside(const Blob& b, int z, int y, int x) {
    const double ez = (z - b.cz) / b.rz;
    const double ey = (y - b.cy) / b.ry;
    const double ex = (x - b.cx) / b.rx;
    return ez * ez + ey * ey + ex * ex <= 1.0;
}

Blob make_blob(const GridSize& grid, const BlobStyle& style, const Blob* previous, Rng& rng) {
    Blob b;
    b.rz = rng.uniform(style.rz_lo, style.rz_hi);
    b.ry = rng.uniform(style.rp_lo, style.rp_hi);
    b.rx = rng.uniform(style.rp_lo, style.rp_hi);
    const auto clampc = [&](double c, double r, int dim) {
        const double lo = std::min(r + 1.0, dim / 2.0 - 1.0);
        return std::clamp(c, lo, dim - 1.0 - lo);
    };
    if (previous && style.attach_to_previous) {
        // Flush against the previous blob, in plane.
        const double ang = rng.uniform(0.0, 2.0 * M_PI);
        const double dy = std::sin(ang);
        const double dx = std::cos(ang);
        const double dist_y = previous->ry + b.ry;
        const double dist_x = previous->rx + b.rx;
        b.cy = previous->cy + dy * dist_y * 0.95;
        b.cx = previous->cx + dx * dist_x * 0.95;
        b.cz = previous->cz + rng.uniform(-1.5, 1.5);
    } else {
        b.cz = rng.uniform(grid.z * 0.3, grid.z * 0.7);
        b.cy = rng.uniform(grid.y * 0.2, grid.y * 0.8);
        b.cx = rng.uniform(grid.x * 0.2, grid.x * 0.8);
    }
    b.cz = clampc(b.cz, b.rz, grid.z);
    b.cy = clampc(b.cy, b.ry, grid.y);
    b.cx = clampc(b.cx, b.rx, grid.x);
    return b;
}

std::string volume_name(int v) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "vol%03d", v);
    return buf;
}

json spec_to_json(const DegradationSpec& s) {
    return json{{"kind", to_string(s.kind)}, {"magnitude", s.magnitude}, {"seed", s.seed}};
}

DegradationSpec spec_from_json(const json& j) {
    DegradationSpec s;
    s.kind = degradation_kind_from_string(j.at("kind").get<std::string>());
    s.magnitude = j.at("magnitude").get<int>();
    s.seed = j.value("seed", std::uint64_t{0});
    return s;
}

json config_to_json(const GeneratorConfig& c) {
    json sev = json::array();
    for (const auto& s : c.severities) sev.push_back(spec_to_json(s));
    return json{{"n_volumes", c.n_volumes},
                {"n_test_volumes", c.n_test_volumes},
                {"grid", {c.grid.z, c.grid.y, c.grid.x}},
                {"spacing", {c.spacing.z, c.spacing.y, c.spacing.x}},
                {"class_names", c.class_names},
                {"severities", sev},
                {"background_hu", c.background_hu},
                {"noise_sd", c.noise_sd}};
}

GeneratorConfig config_from_json(const json& j) {
    GeneratorConfig c;
    c.n_volumes = j.at("n_volumes").get<int>();
    c.n_test_volumes = j.at("n_test_volumes").get<int>();
    c.grid = GridSize{j.at("grid")[0], j.at("grid")[1], j.at("grid")[2]};
    c.spacing = Spacing{j.at("spacing")[0], j.at("spacing")[1], j.at("spacing")[2]};
    c.class_names = j.at("class_names").get<std::vector<std::string>>();
    c.severities.clear();
    for (const auto& s : j.at("severities")) c.severities.push_back(spec_from_json(s));
    c.background_hu = j.at("background_hu").get<double>();
    c.noise_sd = j.at("noise_sd").get<double>();
    return c;
}

} // namespace

std::vector<DegradationSpec> GeneratorConfig::default_severity_ladder() {
    return {
        {DegradationKind::erode, 0, 0},          {DegradationKind::erode, 1, 0},
        {DegradationKind::erode, 2, 0},          {DegradationKind::dilate, 1, 0},
        {DegradationKind::dilate, 3, 0},         {DegradationKind::translate, 3, 0},
        {DegradationKind::merge_neighbor, 4, 0}, {DegradationKind::erode, 4, 0},
    };
}

void GeneratorConfig::validate() const {
    if (n_volumes < 1) throw ValueError("generator needs at least one volume");
    if (n_test_volumes < 0 || n_test_volumes >= n_volumes)
        throw ValueError("n_test_volumes must be in [0, n_volumes)");
    if (class_names.empty()) throw ValueError("generator needs at least one class");
    if (severities.empty()) throw ValueError("generator needs at least one severity");
    if (grid.z < 8 || grid.y < 16 || grid.x < 16) throw ValueError("grid too small");
    ClassVocabulary::from_names(class_names); // validates names
}

const SubjectMeta& CorpusManifest::subject(const std::string& volume_id) const {
    for (const auto& s : subjects)
        if (s.volume_id == volume_id) return s;
    throw ValueError("no subject metadata for volume " + volume_id);
}

std::vector<std::string> CorpusManifest::volume_ids() const {
    std::vector<std::string> ids;
    for (const auto& s : subjects) ids.push_back(s.volume_id);
    return ids;
}

std::string CorpusManifest::resolve(const std::string& rel) const {
    return (fs::path(root) / rel).string();
}

CorpusManifest build_corpus(const GeneratorConfig& config, std::uint64_t seed,
                            const std::string& out_dir) {
    config.validate();
    fs::create_directories(fs::path(out_dir) / "images");
    fs::create_directories(fs::path(out_dir) / "masks");

    CorpusManifest manifest;
    manifest.seed = seed;
    manifest.config = config;
    manifest.vocabulary = ClassVocabulary::from_names(config.class_names);
    manifest.root = out_dir;

    const int n_classes = static_cast<int>(config.class_names.size());
    for (int v = 0; v < config.n_volumes; ++v) {
        Rng rng(derive_seed(seed, "volume", static_cast<std::uint64_t>(v)));
        const std::string vid = volume_name(v);
        const std::string split = v < config.n_volumes - config.n_test_volumes ? "train" : "test";

        SubjectMeta meta;
        meta.volume_id = vid;
        meta.sex = v % 2 == 0 ? Sex::male : Sex::female;
        meta.age = std::round(rng.uniform(20.0, 85.0) * 10.0) / 10.0;
        manifest.subjects.push_back(meta);

        const double shift = rng.uniform(-10.0, 10.0);

        // Paint blobs in class order; earlier classes own contested voxels.
        std::vector<Blob> blobs;
        std::vector<double> intensities;
        for (int c = 0; c < n_classes; ++c) {
            const BlobStyle& style = kPalette[c % 5];
            const Blob* prev = (style.attach_to_previous && !blobs.empty()) ? &blobs.back() : nullptr;
            blobs.push_back(make_blob(config.grid, style, prev, rng));
            intensities.push_back(style.intensity + rng.uniform(-6.0, 6.0));
        }

        Volume image;
        image.shape = config.grid;
        image.spacing = config.spacing;
        image.id = vid;
        image.data.resize(config.grid.voxels());

        std::vector<Mask> gt(n_classes);
        for (int c = 0; c < n_classes; ++c) {
            gt[c].shape = config.grid;
            gt[c].spacing = config.spacing;
            gt[c].id = vid + "_c" + std::to_string(c + 1);
            gt[c].class_id = c + 1;
            gt[c].data.assign(config.grid.voxels(), 0);
        }

        std::size_t idx = 0;
        for (int z = 0; z < config.grid.z; ++z)
            for (int y = 0; y < config.grid.y; ++y)
                for (int x = 0; x < config.grid.x; ++x, ++idx) {
                    int owner = -1;
                    for (int c = 0; c < n_classes; ++c)
                        if (inside(blobs[c], z, y, x)) {
                            owner = c;
                            break;
                        }
                    const double base = owner < 0 ? config.background_hu : intensities[owner];
                    image.data[idx] =
                        static_cast<float>(base + shift + rng.normal(0.0, config.noise_sd));
                    if (owner >= 0) gt[owner].data[idx] = 1;
                }

        const std::string image_rel = "images/" + vid + ".mqv";
        save_volume(image, (fs::path(out_dir) / image_rel).string());

        for (int c = 0; c < n_classes; ++c) {
            const std::string gt_rel =
                "masks/" + vid + "_c" + std::to_string(c + 1) + "_gt.mqv";
            save_mask(gt[c], (fs::path(out_dir) / gt_rel).string());

            for (int s = 0; s < static_cast<int>(config.severities.size()); ++s) {
                DegradationSpec spec = config.severities[s];
                spec.seed = derive_seed(seed, "degrade",
                                        (static_cast<std::uint64_t>(v) * 1000 + c) * 1000 + s);
                Mask degraded = degrade(gt[c], spec);
                degraded.id = vid + "_c" + std::to_string(c + 1) + "_s" + std::to_string(s);

                const std::string deg_rel = "masks/" + vid + "_c" + std::to_string(c + 1) +
                                            "_s" + std::to_string(s) + ".mqv";
                save_mask(degraded, (fs::path(out_dir) / deg_rel).string());

                CorpusRecord rec;
                rec.volume_id = vid;
                rec.class_id = c + 1;
                rec.image_path = image_rel;
                rec.mask_path = deg_rel;
                rec.mask_gt_path = gt_rel;
                rec.actual_dsc = dsc(degraded, gt[c]);
                rec.split = split;
                rec.severity = s;
                rec.degradation = spec;
                manifest.records.push_back(rec);
            }
        }
    }

    save_manifest(manifest, (fs::path(out_dir) / "manifest.json").string());
    return manifest;
}

CorpusManifest resample_corpus(const CorpusManifest& manifest,
                               const std::vector<QualityRecord>& estimates, int m,
                               const std::string& balance_key) {
    if (balance_key != "sex")
        throw ValueError("unsupported balance key: " + balance_key);
    if (m < 1) throw ValueError("m must be positive");

    std::unordered_map<std::string, std::pair<double, int>> sums;
    for (const auto& e : estimates) {
        auto& s = sums[e.volume_id];
        s.first += e.predicted_dsc;
        s.second += 1;
    }

    // group -> (mean quality desc, volume_id asc)
    std::map<std::string, std::vector<std::pair<double, std::string>>> groups;
    for (const auto& subj : manifest.subjects) {
        const auto it = sums.find(subj.volume_id);
        if (it == sums.end())
            throw ValueError("missing estimate for volume " + subj.volume_id);
        groups[to_string(subj.sex)].push_back(
            {it->second.first / it->second.second, subj.volume_id});
    }
    const int n_groups = static_cast<int>(groups.size());
    const int per_group = m / n_groups;
    if (per_group < 1) throw CapacityError("m too small for the number of balance groups");

    std::vector<std::string> chosen;
    for (auto& [key, vols] : groups) {
        if (static_cast<int>(vols.size()) < per_group)
            throw CapacityError("group '" + key + "' has only " +
                                std::to_string(vols.size()) + " volumes, need " +
                                std::to_string(per_group));
        std::sort(vols.begin(), vols.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        for (int i = 0; i < per_group; ++i) chosen.push_back(vols[i].second);
    }
    std::sort(chosen.begin(), chosen.end());

    CorpusManifest out;
    out.seed = manifest.seed;
    out.config = manifest.config;
    out.vocabulary = manifest.vocabulary;
    out.root = manifest.root;
    const auto keep = [&](const std::string& vid) {
        return std::binary_search(chosen.begin(), chosen.end(), vid);
    };
    for (const auto& s : manifest.subjects)
        if (keep(s.volume_id)) out.subjects.push_back(s);
    for (const auto& r : manifest.records)
        if (keep(r.volume_id)) out.records.push_back(r);
    return out;
}

void save_manifest(const CorpusManifest& m, const std::string& path) {
    json subjects = json::array();
    for (const auto& s : m.subjects) {
        json js{{"volume_id", s.volume_id}, {"sex", to_string(s.sex)}};
        if (s.age) js["age"] = *s.age;
        subjects.push_back(js);
    }
    json classes = json::array();
    for (const auto& e : m.vocabulary.entries)
        classes.push_back(json{{"id", e.id}, {"name", e.name}});
    json records = json::array();
    for (const auto& r : m.records)
        records.push_back(json{{"volume_id", r.volume_id},
                               {"class_id", r.class_id},
                               {"image", r.image_path},
                               {"mask", r.mask_path},
                               {"mask_gt", r.mask_gt_path},
                               {"actual_dsc", r.actual_dsc},
                               {"split", r.split},
                               {"severity", r.severity},
                               {"degradation", spec_to_json(r.degradation)}});
    const json j{{"format", "mqc-corpus"}, {"version", 1},          {"seed", m.seed},
                 {"config", config_to_json(m.config)},              {"classes", classes},
                 {"subjects", subjects},  {"records", records}};
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write manifest: " + path);
    out << j.dump(1) << "\n";
}

CorpusManifest load_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open manifest: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw FormatError("corrupt manifest " + path + ": " + e.what());
    }
    if (j.value("format", "") != "mqc-corpus")
        throw FormatError("not a corpus manifest: " + path);

    CorpusManifest m;
    m.seed = j.at("seed").get<std::uint64_t>();
    m.config = config_from_json(j.at("config"));
    for (const auto& c : j.at("classes"))
        m.vocabulary.entries.push_back({c.at("id").get<int>(), c.at("name").get<std::string>()});
    m.vocabulary.validate();
    for (const auto& s : j.at("subjects")) {
        SubjectMeta meta;
        meta.volume_id = s.at("volume_id").get<std::string>();
        meta.sex = sex_from_string(s.at("sex").get<std::string>());
        if (s.contains("age")) meta.age = s.at("age").get<double>();
        m.subjects.push_back(meta);
    }
    for (const auto& r : j.at("records")) {
        CorpusRecord rec;
        rec.volume_id = r.at("volume_id").get<std::string>();
        rec.class_id = r.at("class_id").get<int>();
        rec.image_path = r.at("image").get<std::string>();
        rec.mask_path = r.at("mask").get<std::string>();
        rec.mask_gt_path = r.at("mask_gt").get<std::string>();
        rec.actual_dsc = r.at("actual_dsc").get<double>();
        rec.split = r.at("split").get<std::string>();
        rec.severity = r.at("severity").get<int>();
        rec.degradation = spec_from_json(r.at("degradation"));
        m.records.push_back(rec);
    }
    m.root = fs::path(path).parent_path().string();
    return m;
}

} // namespace mqc
