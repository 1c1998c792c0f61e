#include "sid/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace sid {

namespace {
const double kThresholds[] = {0.25, 0.5, 0.75};
const int kKs[] = {25, 50, 100};

bool pred_order(const Triplet& a, const Triplet& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.group_index != b.group_index) return a.group_index < b.group_index;
    return a.class_id < b.class_id;
}
}  // namespace

bool match_triplet(const Triplet& pred, const GtTriplet& gt, double iou_threshold) {
    return pred.class_id == gt.class_id &&
           iou(pred.individual_box, gt.individual_box) >= iou_threshold &&
           iou(pred.group_box, gt.group_box) >= iou_threshold;
}

// Accumulates (recalled, total) per class over the split.
static std::map<int, std::pair<long, long>> tally(const std::vector<ImagePredictions>& preds,
                                                  const std::vector<ImageGroundTruth>& gts,
                                                  int k, double t) {
    std::map<int, std::pair<long, long>> acc;
    for (std::size_t im = 0; im < gts.size(); ++im) {
        for (const auto& g : gts[im].triplets) acc[g.class_id].second += 1;
        std::vector<Triplet> ts = preds[im].triplets;
        std::sort(ts.begin(), ts.end(), pred_order);
        if (static_cast<int>(ts.size()) > k) ts.resize(k);
        std::vector<char> used(gts[im].triplets.size(), 0);
        for (const auto& p : ts) {
            for (std::size_t j = 0; j < gts[im].triplets.size(); ++j) {
                if (used[j]) continue;
                if (match_triplet(p, gts[im].triplets[j], t)) {
                    used[j] = 1;
                    acc[gts[im].triplets[j].class_id].first += 1;
                    break;
                }
            }
        }
    }
    return acc;
}

std::map<int, double> recall_at_k(const std::vector<ImagePredictions>& preds,
                                  const std::vector<ImageGroundTruth>& gts, int k,
                                  double t) {
    if (preds.size() != gts.size())
        throw std::invalid_argument("recall_at_k: split size mismatch");
    std::map<int, double> out;
    for (const auto& [cls, rt] : tally(preds, gts, k, t))
        if (rt.second > 0)
            out[cls] = static_cast<double>(rt.first) / static_cast<double>(rt.second);
    return out;
}

MetricReport evaluate(const std::vector<ImagePredictions>& preds,
                      const std::vector<ImageGroundTruth>& gts) {
    if (preds.size() != gts.size())
        throw std::invalid_argument("evaluate: prediction/ground-truth image count mismatch");
    // Align predictions to the ground-truth order; the only accepted
    // difference between the two lists is their ordering.
    std::map<std::string, const ImagePredictions*> by_id;
    std::ostringstream offenders;
    for (const auto& p : preds)
        if (!by_id.emplace(p.id, &p).second) offenders << " duplicate:" << p.id;
    std::vector<ImagePredictions> aligned;
    aligned.reserve(gts.size());
    for (const auto& g : gts) {
        auto it = by_id.find(g.id);
        if (it == by_id.end()) {
            offenders << " missing:" << g.id;
            continue;
        }
        aligned.push_back(*it->second);
    }
    if (!offenders.str().empty())
        throw std::runtime_error("evaluate: image id mismatch:" + offenders.str());
    const std::vector<ImagePredictions>& preds_aligned = aligned;

    MetricReport rep;
    double* mrs[] = {&rep.mr25, &rep.mr50, &rep.mr100};
    std::map<int, double>* pcs[] = {&rep.per_class_r25, &rep.per_class_r50,
                                    &rep.per_class_r100};
    for (int ki = 0; ki < 3; ++ki) {
        // recall per (class, threshold) -> mean over thresholds -> mean over classes
        std::map<int, double> class_sum;
        std::map<int, int> class_cnt;
        for (double t : kThresholds) {
            for (const auto& [cls, r] : recall_at_k(preds_aligned, gts, kKs[ki], t)) {
                class_sum[cls] += r;
                class_cnt[cls] += 1;
            }
        }
        double total = 0.0;
        for (const auto& [cls, s] : class_sum) {
            const double r = s / class_cnt[cls];
            (*pcs[ki])[cls] = r * 100.0;
            total += r;
        }
        *mrs[ki] = class_sum.empty() ? 0.0 : total / class_sum.size() * 100.0;
    }
    rep.ar = (rep.mr25 + rep.mr50 + rep.mr100) / 3.0;
    return rep;
}

void save_predictions(const std::string& path, const std::vector<ImagePredictions>& preds) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("save_predictions: cannot open " + path);
    f << "# sid predictions v1\n";
    f.precision(17);
    for (const auto& im : preds) {
        f << "image " << im.id << " " << im.triplets.size() << "\n";
        for (const auto& t : im.triplets) {
            const CornerBox i = to_corners(t.individual_box);
            const CornerBox g = to_corners(t.group_box);
            f << i.x1 << " " << i.y1 << " " << i.x2 << " " << i.y2 << " " << g.x1 << " "
              << g.y1 << " " << g.x2 << " " << g.y2 << " " << t.class_id << " " << t.score
              << "\n";
        }
    }
}

std::vector<ImagePredictions> load_predictions(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_predictions: cannot open " + path);
    std::string line;
    std::getline(f, line);
    if (line != "# sid predictions v1")
        throw std::runtime_error("load_predictions: bad header in " + path);
    std::vector<ImagePredictions> out;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string kw;
        ls >> kw;
        if (kw != "image") throw std::runtime_error("load_predictions: expected image line");
        ImagePredictions im;
        std::size_t n = 0;
        ls >> im.id >> n;
        for (std::size_t i = 0; i < n; ++i) {
            if (!std::getline(f, line))
                throw std::runtime_error("load_predictions: truncated file");
            std::istringstream ts(line);
            CornerBox ic, gc;
            Triplet t;
            ts >> ic.x1 >> ic.y1 >> ic.x2 >> ic.y2 >> gc.x1 >> gc.y1 >> gc.x2 >> gc.y2 >>
                t.class_id >> t.score;
            if (!ts) throw std::runtime_error("load_predictions: malformed triplet line");
            t.individual_box = from_corners(ic);
            t.group_box = from_corners(gc);
            im.triplets.push_back(t);
        }
        out.push_back(std::move(im));
    }
    return out;
}

std::string format_report(const MetricReport& r, bool per_class) {
    std::ostringstream os;
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-8s %8s %8s %8s %8s\n", "", "mR@25", "mR@50",
                  "mR@100", "AR");
    os << buf;
    std::snprintf(buf, sizeof buf, "%-8s %8.2f %8.2f %8.2f %8.2f\n", "all", r.mr25, r.mr50,
                  r.mr100, r.ar);
    os << buf;
    if (per_class) {
        for (const auto& [cls, v] : r.per_class_r25) {
            std::snprintf(buf, sizeof buf, "class_%-2d %8.2f %8.2f %8.2f\n", cls, v,
                          r.per_class_r50.at(cls), r.per_class_r100.at(cls));
            os << buf;
        }
    }
    return os.str();
}

void save_report_kv(const std::string& path, const MetricReport& r) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("save_report_kv: cannot open " + path);
    f.precision(17);
    f << "mR25=" << r.mr25 << "\nmR50=" << r.mr50 << "\nmR100=" << r.mr100
      << "\nAR=" << r.ar << "\n";
    for (const auto& [cls, v] : r.per_class_r25) f << "class" << cls << "_R25=" << v << "\n";
    for (const auto& [cls, v] : r.per_class_r50) f << "class" << cls << "_R50=" << v << "\n";
    for (const auto& [cls, v] : r.per_class_r100)
        f << "class" << cls << "_R100=" << v << "\n";
}

}  // namespace sid
