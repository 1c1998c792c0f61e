#include "sid/data.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <set>
#include <stdexcept>

namespace sid {

using nlohmann::json;

static json box_to_json(const Box& b, int w, int h) {
    const CornerBox c = to_corners(b);
    return json::array({c.x1 * w, c.y1 * h, c.x2 * w, c.y2 * h});
}

static Box box_from_json(const json& j, int w, int h, const std::string& where) {
    if (!j.is_array() || j.size() != 4)
        throw std::runtime_error(where + ": box must be [x1,y1,x2,y2]");
    CornerBox c{j[0].get<double>() / w, j[1].get<double>() / h, j[2].get<double>() / w,
                j[3].get<double>() / h};
    if (c.x1 < -1e-9 || c.y1 < -1e-9 || c.x2 > 1.0 + 1e-9 || c.y2 > 1.0 + 1e-9 ||
        c.x2 <= c.x1 || c.y2 <= c.y1)
        throw std::runtime_error(where + ": box out of image bounds or degenerate");
    c.x1 = std::clamp(c.x1, 0.0, 1.0);
    c.y1 = std::clamp(c.y1, 0.0, 1.0);
    c.x2 = std::clamp(c.x2, 0.0, 1.0);
    c.y2 = std::clamp(c.y2, 0.0, 1.0);
    return from_corners(c);
}

void save_split(const Dataset& ds) {
    json root;
    root["schema_version"] = ds.schema_version;
    root["num_classes"] = ds.num_classes;
    json scenes = json::array();
    bool any_kps = false;
    for (const auto& s : ds.scenes) {
        json js;
        js["id"] = s.id;
        js["image"] = s.image_file;
        js["width"] = s.width;
        js["height"] = s.height;
        json persons = json::array();
        for (const auto& b : s.individuals) persons.push_back({{"box", box_to_json(b, s.width, s.height)}});
        js["persons"] = persons;
        json groups = json::array();
        for (const auto& g : s.groups) {
            groups.push_back({{"box", box_to_json(g.box, s.width, s.height)},
                              {"members", g.members},
                              {"classes", g.classes}});
        }
        js["groups"] = groups;
        scenes.push_back(js);
        any_kps = any_kps || !s.keypoints.empty();
    }
    root["scenes"] = scenes;
    std::ofstream f(ds.dir + "/annotations.json");
    if (!f) throw std::runtime_error("save_split: cannot open " + ds.dir + "/annotations.json");
    f << root.dump(1) << "\n";

    if (any_kps) {
        json kroot;
        kroot["schema_version"] = 1;
        json parts = json::array();
        for (const char* n : kPartNames) parts.push_back(n);
        kroot["parts"] = parts;
        json kscenes = json::array();
        for (const auto& s : ds.scenes) {
            json ks;
            ks["id"] = s.id;
            json pers = json::array();
            for (const auto& kpset : s.keypoints) {
                json arr = json::array();
                for (const auto& k : kpset) arr.push_back({k.x, k.y, k.valid ? 1 : 0});
                pers.push_back(arr);
            }
            ks["persons"] = pers;
            kscenes.push_back(ks);
        }
        kroot["scenes"] = kscenes;
        std::ofstream kf(ds.dir + "/keypoints.json");
        if (!kf) throw std::runtime_error("save_split: cannot open keypoints sidecar");
        kf << kroot.dump(1) << "\n";
    }
}

Dataset load_split(const std::string& dir) {
    std::ifstream f(dir + "/annotations.json");
    if (!f) throw std::runtime_error("load_split: cannot open " + dir + "/annotations.json");
    json root = json::parse(f);
    Dataset ds;
    ds.dir = dir;
    ds.schema_version = root.at("schema_version").get<int>();
    if (ds.schema_version != 1)
        throw std::runtime_error("load_split: unsupported schema_version");
    ds.num_classes = root.at("num_classes").get<int>();
    for (const auto& js : root.at("scenes")) {
        Scene s;
        s.id = js.at("id").get<std::string>();
        const std::string where = dir + "/annotations.json scene " + s.id;
        s.image_file = js.at("image").get<std::string>();
        s.width = js.at("width").get<int>();
        s.height = js.at("height").get<int>();
        if (s.width <= 0 || s.height <= 0) throw std::runtime_error(where + ": bad image size");
        for (const auto& jp : js.at("persons"))
            s.individuals.push_back(box_from_json(jp.at("box"), s.width, s.height, where));
        for (const auto& jg : js.at("groups")) {
            GroupAnnotation g;
            g.box = box_from_json(jg.at("box"), s.width, s.height, where);
            g.members = jg.at("members").get<std::vector<int>>();
            g.classes = jg.at("classes").get<std::vector<int>>();
            if (g.members.empty()) throw std::runtime_error(where + ": group with no members");
            for (int m : g.members)
                if (m < 0 || m >= static_cast<int>(s.individuals.size()))
                    throw std::runtime_error(where + ": dangling member index");
            for (int c : g.classes)
                if (c < 0 || c >= ds.num_classes)
                    throw std::runtime_error(where + ": class id out of range");
            s.groups.push_back(std::move(g));
        }
        ds.scenes.push_back(std::move(s));
    }

    std::ifstream kf(dir + "/keypoints.json");
    if (kf) {
        json kroot = json::parse(kf);
        std::size_t si = 0;
        for (const auto& ks : kroot.at("scenes")) {
            if (si >= ds.scenes.size()) throw std::runtime_error("keypoints.json: extra scenes");
            Scene& s = ds.scenes[si];
            if (ks.at("id").get<std::string>() != s.id)
                throw std::runtime_error("keypoints.json: id mismatch at scene " + s.id);
            for (const auto& jp : ks.at("persons")) {
                KeypointSet kps;
                for (const auto& jk : jp) {
                    Keypoint k;
                    k.x = jk[0].get<double>();
                    k.y = jk[1].get<double>();
                    k.valid = jk[2].get<int>() != 0;
                    kps.push_back(k);
                }
                if (kps.size() != kNumParts)
                    throw std::runtime_error("keypoints.json: keypoint count != 13 in " + s.id);
                s.keypoints.push_back(std::move(kps));
            }
            if (s.keypoints.size() != s.individuals.size())
                throw std::runtime_error("keypoints.json: person count mismatch in " + s.id);
            ++si;
        }
    }
    return ds;
}

void load_images(Dataset& ds) {
    for (auto& s : ds.scenes)
        if (!s.image) s.image = load_ppm(ds.dir + "/" + s.image_file);
}

GroupTargets derive_group_targets(const Scene& scene, int num_classes) {
    GroupTargets t;
    for (const auto& g : scene.groups) {
        t.boxes.push_back(g.box);
        std::vector<double> row(scene.individuals.size(), 0.0);
        for (int m : g.members) row[m] = 1.0;
        t.membership.push_back(std::move(row));
        std::vector<double> cls(num_classes, 0.0);
        for (int c : g.classes) cls[c] = 1.0;
        t.class_vectors.push_back(std::move(cls));
    }
    return t;
}

std::vector<GtTriplet> derive_gt_triplets(const Scene& scene) {
    std::vector<GtTriplet> out;
    for (const auto& g : scene.groups)
        for (int m : g.members)
            for (int c : g.classes)
                out.push_back({scene.individuals[m], g.box, c});
    return out;
}

std::vector<ImageGroundTruth> to_ground_truth(const Dataset& ds) {
    std::vector<ImageGroundTruth> out;
    for (const auto& s : ds.scenes) out.push_back({s.id, derive_gt_triplets(s)});
    return out;
}

}  // namespace sid
