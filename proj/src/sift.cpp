#include "spotmatch/sift.hpp"

#include <algorithm>
#include <cmath>

namespace spotmatch {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// reflect-101 fold into [0, n)
int mirror(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i = std::abs(i) % period;
    return (i < n) ? i : period - i;
}

std::vector<float> gaussian_kernel(double sigma) {
    const int radius = std::max(1, static_cast<int>(std::ceil(4.0 * sigma)));
    std::vector<float> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; i++) {
        double v = std::exp(-(static_cast<double>(i) * i) / (2.0 * sigma * sigma));
        k[i + radius] = static_cast<float>(v);
        sum += v;
    }
    for (auto& v : k) v = static_cast<float>(v / sum);
    return k;
}

GrayImage downsample2(const GrayImage& img) {
    GrayImage out(img.width / 2, img.height / 2);
    for (int y = 0; y < out.height; y++)
        for (int x = 0; x < out.width; x++) out.at(x, y) = img.at(2 * x, 2 * y);
    return out;
}

double wrap_angle(double a) {
    a = std::fmod(a, kTwoPi);
    if (a < 0) a += kTwoPi;
    return a;
}

}  // namespace

GrayImage gaussian_blur(const GrayImage& img, double sigma) {
    if (sigma <= 0.0) return img;
    const auto kernel = gaussian_kernel(sigma);
    const int radius = static_cast<int>(kernel.size() / 2);
    const int w = img.width, h = img.height;

    GrayImage tmp(w, h), out(w, h);
    for (int y = 0; y < h; y++) {
        for (int x = 0; x < w; x++) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; k++)
                acc += kernel[k + radius] * img.at(mirror(x + k, w), y);
            tmp.at(x, y) = static_cast<float>(acc);
        }
    }
    for (int y = 0; y < h; y++) {
        for (int x = 0; x < w; x++) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; k++)
                acc += kernel[k + radius] * tmp.at(x, mirror(y + k, h));
            out.at(x, y) = static_cast<float>(acc);
        }
    }
    return out;
}

ScaleSpacePyramid build_gaussian_pyramid(const GrayImage& img, const SiftConfig& cfg) {
    if (img.width < 16 || img.height < 16)
        throw Error(ErrorCode::ImageTooSmall, "pyramid needs at least 16x16");
    if (cfg.sigma0 <= 0.0 || cfg.intervals < 1)
        throw Error(ErrorCode::InvalidConfig, "sigma0 > 0 and intervals >= 1 required");

    const int s = cfg.intervals;
    int n_octaves = cfg.n_octaves;
    if (n_octaves <= 0) {
        n_octaves = static_cast<int>(std::floor(std::log2(std::min(img.width, img.height)))) - 2;
        n_octaves = std::max(1, n_octaves);
    }

    ScaleSpacePyramid p;
    p.sigma0 = cfg.sigma0;
    p.intervals = s;

    GrayImage base;
    const double init = cfg.sigma0 * cfg.sigma0 - cfg.assumed_blur * cfg.assumed_blur;
    base = (init > 1e-12) ? gaussian_blur(img, std::sqrt(init)) : img;

    for (int o = 0; o < n_octaves; o++) {
        std::vector<GrayImage> levels;
        levels.reserve(s + 3);
        if (o == 0) {
            levels.push_back(std::move(base));
        } else {
            // level s of the previous octave carries blur 2*sigma0
            const GrayImage& seed = p.octaves[o - 1][s];
            if (seed.width < 2 || seed.height < 2) break;
            levels.push_back(downsample2(seed));
        }
        for (int i = 1; i < s + 3; i++) {
            const double prev = cfg.sigma0 * std::pow(2.0, static_cast<double>(i - 1) / s);
            const double cur = cfg.sigma0 * std::pow(2.0, static_cast<double>(i) / s);
            const double inc = std::sqrt(cur * cur - prev * prev);
            levels.push_back(gaussian_blur(levels.back(), inc));
        }
        p.octaves.push_back(std::move(levels));
    }
    return p;
}

DoGPyramid build_dog_pyramid(const ScaleSpacePyramid& p) {
    DoGPyramid d;
    for (const auto& levels : p.octaves) {
        std::vector<GrayImage> dogs;
        dogs.reserve(levels.size() - 1);
        for (size_t i = 0; i + 1 < levels.size(); i++) {
            GrayImage g(levels[i].width, levels[i].height);
            for (size_t k = 0; k < g.pixels.size(); k++)
                g.pixels[k] = levels[i + 1].pixels[k] - levels[i].pixels[k];
            dogs.push_back(std::move(g));
        }
        d.octaves.push_back(std::move(dogs));
    }
    return d;
}

std::vector<CandidateExtremum> detect_candidates(const DoGPyramid& d, double contrast_floor) {
    std::vector<CandidateExtremum> out;
    for (size_t o = 0; o < d.octaves.size(); o++) {
        const auto& dogs = d.octaves[o];
        for (size_t l = 1; l + 1 < dogs.size(); l++) {
            const GrayImage& below = dogs[l - 1];
            const GrayImage& cur = dogs[l];
            const GrayImage& above = dogs[l + 1];
            for (int r = 1; r + 1 < cur.height; r++) {
                for (int c = 1; c + 1 < cur.width; c++) {
                    const float v = cur.at(c, r);
                    if (std::fabs(v) <= contrast_floor) continue;
                    bool is_max = true, is_min = true;
                    for (int dr = -1; dr <= 1 && (is_max || is_min); dr++) {
                        for (int dc = -1; dc <= 1; dc++) {
                            for (const GrayImage* im : {&below, &cur, &above}) {
                                if (im == &cur && dr == 0 && dc == 0) continue;
                                const float n = im->at(c + dc, r + dr);
                                if (n >= v) is_max = false;
                                if (n <= v) is_min = false;
                            }
                        }
                    }
                    if (is_max || is_min)
                        out.push_back({static_cast<int>(o), static_cast<int>(l), r, c});
                }
            }
        }
    }
    return out;
}

namespace {

struct Quadric {
    double g[3];     // gradient (col, row, level)
    double h[3][3];  // Hessian, same order
    double value;
};

Quadric sample_quadric(const std::vector<GrayImage>& dogs, int l, int r, int c) {
    auto D = [&](int dl, int dr, int dc) -> double {
        return dogs[l + dl].at(c + dc, r + dr);
    };
    Quadric q;
    q.value = D(0, 0, 0);
    q.g[0] = 0.5 * (D(0, 0, 1) - D(0, 0, -1));
    q.g[1] = 0.5 * (D(0, 1, 0) - D(0, -1, 0));
    q.g[2] = 0.5 * (D(1, 0, 0) - D(-1, 0, 0));
    q.h[0][0] = D(0, 0, 1) - 2 * q.value + D(0, 0, -1);
    q.h[1][1] = D(0, 1, 0) - 2 * q.value + D(0, -1, 0);
    q.h[2][2] = D(1, 0, 0) - 2 * q.value + D(-1, 0, 0);
    q.h[0][1] = q.h[1][0] = 0.25 * (D(0, 1, 1) - D(0, 1, -1) - D(0, -1, 1) + D(0, -1, -1));
    q.h[0][2] = q.h[2][0] = 0.25 * (D(1, 0, 1) - D(1, 0, -1) - D(-1, 0, 1) + D(-1, 0, -1));
    q.h[1][2] = q.h[2][1] = 0.25 * (D(1, 1, 0) - D(1, -1, 0) - D(-1, 1, 0) + D(-1, -1, 0));
    return q;
}

// solve h * x = -g; returns false if near-singular
bool solve_offset(const Quadric& q, double out[3]) {
    double a[3][4];
    for (int i = 0; i < 3; i++) {
        for (int j = 0; j < 3; j++) a[i][j] = q.h[i][j];
        a[i][3] = -q.g[i];
    }
    for (int col = 0; col < 3; col++) {
        int piv = col;
        for (int i = col + 1; i < 3; i++)
            if (std::fabs(a[i][col]) > std::fabs(a[piv][col])) piv = i;
        if (std::fabs(a[piv][col]) < 1e-12) return false;
        std::swap(a[col], a[piv]);
        for (int i = 0; i < 3; i++) {
            if (i == col) continue;
            double f = a[i][col] / a[col][col];
            for (int j = col; j < 4; j++) a[i][j] -= f * a[col][j];
        }
    }
    for (int i = 0; i < 3; i++) out[i] = a[i][3] / a[i][i];
    return true;
}

}  // namespace

std::optional<RefinedKeypoint> refine_and_filter(const CandidateExtremum& cand,
                                                 const DoGPyramid& d, const SiftConfig& cfg,
                                                 RejectReason* reason) {
    auto reject = [&](RejectReason r) -> std::optional<RefinedKeypoint> {
        if (reason) *reason = r;
        return std::nullopt;
    };

    const auto& dogs = d.octaves[cand.octave];
    const int max_level = static_cast<int>(dogs.size()) - 2;  // refits stay off the outer levels
    int l = cand.level, r = cand.row, c = cand.col;

    Quadric q{};
    double off[3] = {0, 0, 0};
    bool converged = false;
    for (int iter = 0; iter < cfg.max_refine_iters; iter++) {
        q = sample_quadric(dogs, l, r, c);
        if (!solve_offset(q, off)) return reject(RejectReason::SingularHessian);
        if (std::fabs(off[0]) <= 0.5 && std::fabs(off[1]) <= 0.5 && std::fabs(off[2]) <= 0.5) {
            converged = true;
            break;
        }
        c += static_cast<int>(std::lround(off[0]));
        r += static_cast<int>(std::lround(off[1]));
        l += static_cast<int>(std::lround(off[2]));
        if (l < 1 || l > max_level || r < 1 || r + 1 >= dogs[l].height || c < 1 ||
            c + 1 >= dogs[l].width)
            return reject(RejectReason::OutOfBounds);
    }
    if (!converged) return reject(RejectReason::DivergedRefinement);

    const double interp =
        q.value + 0.5 * (q.g[0] * off[0] + q.g[1] * off[1] + q.g[2] * off[2]);
    if (std::fabs(interp) < cfg.contrast_threshold / cfg.intervals)
        return reject(RejectReason::LowContrast);

    const double tr = q.h[0][0] + q.h[1][1];
    const double det2 = q.h[0][0] * q.h[1][1] - q.h[0][1] * q.h[0][1];
    const double er = cfg.edge_ratio;
    if (det2 <= 0.0 || tr * tr / det2 >= (er + 1.0) * (er + 1.0) / er)
        return reject(RejectReason::EdgeLike);

    const double scale_mult = std::pow(2.0, cand.octave);
    RefinedKeypoint rk;
    rk.kp.x = (c + off[0]) * scale_mult;
    rk.kp.y = (r + off[1]) * scale_mult;
    rk.kp.level = l + off[2];
    rk.kp.scale = cfg.sigma0 * std::pow(2.0, cand.octave + rk.kp.level / cfg.intervals);
    rk.kp.octave = cand.octave;
    rk.kp.response = std::fabs(interp);
    rk.off_col = off[0];
    rk.off_row = off[1];
    rk.off_level = off[2];
    rk.grid_col = c;
    rk.grid_row = r;
    rk.grid_level = l;
    return rk;
}

std::vector<Keypoint> assign_orientations(const RefinedKeypoint& rk, const ScaleSpacePyramid& p,
                                          const SiftConfig& cfg, RejectReason* reason) {
    auto reject = [&](RejectReason r) -> std::vector<Keypoint> {
        if (reason) *reason = r;
        return {};
    };

    const auto& levels = p.octaves[rk.kp.octave];
    const int lvl =
        std::clamp(static_cast<int>(std::lround(rk.kp.level)), 0, static_cast<int>(levels.size()) - 1);
    const GrayImage& img = levels[lvl];

    const double sigma_oct = cfg.sigma0 * std::pow(2.0, rk.kp.level / cfg.intervals);
    const double sigma_w = 1.5 * sigma_oct;
    const int radius = std::max(1, static_cast<int>(std::lround(3.0 * sigma_w)));
    const double cx = rk.grid_col + rk.off_col;
    const double cy = rk.grid_row + rk.off_row;
    const int icx = static_cast<int>(std::lround(cx));
    const int icy = static_cast<int>(std::lround(cy));

    const int nbins = cfg.orientation_bins;
    std::vector<double> hist(nbins, 0.0);
    double total = 0.0;
    for (int dy = -radius; dy <= radius; dy++) {
        for (int dx = -radius; dx <= radius; dx++) {
            const int x = icx + dx, y = icy + dy;
            if (x < 1 || y < 1 || x + 1 >= img.width || y + 1 >= img.height) continue;
            const double gx = img.at(x + 1, y) - img.at(x - 1, y);
            const double gy = img.at(x, y + 1) - img.at(x, y - 1);
            const double mag = std::hypot(gx, gy);
            if (mag <= 0.0) continue;
            const double rx = x - cx, ry = y - cy;
            const double weight = std::exp(-(rx * rx + ry * ry) / (2.0 * sigma_w * sigma_w));
            const double ang = wrap_angle(std::atan2(gy, gx));
            int bin = static_cast<int>(ang / kTwoPi * nbins) % nbins;
            hist[bin] += weight * mag;
            total += weight * mag;
        }
    }
    if (total <= 0.0) return reject(RejectReason::DegenerateGradient);

    // one circular [1,1,1]/3 smoothing pass
    std::vector<double> smooth(nbins);
    for (int i = 0; i < nbins; i++) {
        smooth[i] = (hist[(i + nbins - 1) % nbins] + hist[i] + hist[(i + 1) % nbins]) / 3.0;
    }

    const double peak = *std::max_element(smooth.begin(), smooth.end());
    if (peak <= 0.0) return reject(RejectReason::DegenerateGradient);

    std::vector<Keypoint> out;
    for (int i = 0; i < nbins; i++) {
        const double left = smooth[(i + nbins - 1) % nbins];
        const double right = smooth[(i + 1) % nbins];
        if (smooth[i] < cfg.peak_ratio * peak) continue;
        if (!(smooth[i] > left && smooth[i] >= right)) continue;
        double denom = left - 2.0 * smooth[i] + right;
        double delta = (std::fabs(denom) > 1e-12) ? 0.5 * (left - right) / denom : 0.0;
        delta = std::clamp(delta, -0.5, 0.5);
        Keypoint kp = rk.kp;
        kp.orientation = wrap_angle((i + 0.5 + delta) * kTwoPi / nbins);
        out.push_back(kp);
    }
    if (out.empty()) return reject(RejectReason::DegenerateGradient);
    return out;
}

std::optional<Descriptor> compute_descriptor(const Keypoint& kp, const ScaleSpacePyramid& p,
                                             const SiftConfig& cfg, RejectReason* reason) {
    auto reject = [&](RejectReason r) -> std::optional<Descriptor> {
        if (reason) *reason = r;
        return std::nullopt;
    };

    constexpr int kGrid = 4;
    constexpr int kOriBins = 8;

    const auto& levels = p.octaves[kp.octave];
    const int lvl =
        std::clamp(static_cast<int>(std::lround(kp.level)), 0, static_cast<int>(levels.size()) - 1);
    const GrayImage& img = levels[lvl];

    const double scale_mult = std::pow(2.0, kp.octave);
    const double cx = kp.x / scale_mult;
    const double cy = kp.y / scale_mult;
    const double sigma_oct = cfg.sigma0 * std::pow(2.0, kp.level / cfg.intervals);

    const double hist_width = 3.0 * sigma_oct;
    const int radius =
        static_cast<int>(std::lround(hist_width * std::sqrt(2.0) * (kGrid + 1) * 0.5));
    const int icx = static_cast<int>(std::lround(cx));
    const int icy = static_cast<int>(std::lround(cy));
    if (icx - radius < 1 || icy - radius < 1 || icx + radius + 1 >= img.width ||
        icy + radius + 1 >= img.height)
        return reject(RejectReason::WindowOutOfBounds);

    const double cos_t = std::cos(kp.orientation);
    const double sin_t = std::sin(kp.orientation);
    // padded histogram so trilinear scatter never bounds-checks
    double hist[kGrid + 2][kGrid + 2][kOriBins] = {};

    for (int dy = -radius; dy <= radius; dy++) {
        for (int dx = -radius; dx <= radius; dx++) {
            const int x = icx + dx, y = icy + dy;
            const double fx = x - cx, fy = y - cy;
            const double xr = (fx * cos_t + fy * sin_t) / hist_width;
            const double yr = (-fx * sin_t + fy * cos_t) / hist_width;
            const double rbin = yr + kGrid / 2.0 - 0.5;
            const double cbin = xr + kGrid / 2.0 - 0.5;
            if (rbin <= -1.0 || rbin >= kGrid || cbin <= -1.0 || cbin >= kGrid) continue;

            const double gx = img.at(x + 1, y) - img.at(x - 1, y);
            const double gy = img.at(x, y + 1) - img.at(x, y - 1);
            const double mag = std::hypot(gx, gy);
            if (mag <= 0.0) continue;
            const double ang = wrap_angle(std::atan2(gy, gx) - kp.orientation);
            const double obin = ang / kTwoPi * kOriBins;
            // sample weight sigma = half the window width (2 bins)
            const double weight = std::exp(-(xr * xr + yr * yr) / (2.0 * (kGrid / 2.0) * (kGrid / 2.0)));
            const double w = weight * mag;

            const int r0 = static_cast<int>(std::floor(rbin));
            const int c0 = static_cast<int>(std::floor(cbin));
            const int o0 = static_cast<int>(std::floor(obin));
            const double dr = rbin - r0, dc = cbin - c0, dob = obin - o0;
            for (int ri = 0; ri <= 1; ri++) {
                const double wr = w * (ri ? dr : 1.0 - dr);
                for (int ci = 0; ci <= 1; ci++) {
                    const double wc = wr * (ci ? dc : 1.0 - dc);
                    for (int oi = 0; oi <= 1; oi++) {
                        const double wo = wc * (oi ? dob : 1.0 - dob);
                        hist[r0 + ri + 1][c0 + ci + 1][(o0 + oi) % kOriBins] += wo;
                    }
                }
            }
        }
    }

    Descriptor desc{};
    int idx = 0;
    double norm_sq = 0.0;
    for (int r = 1; r <= kGrid; r++) {
        for (int c = 1; c <= kGrid; c++) {
            for (int o = 0; o < kOriBins; o++) {
                const double v = hist[r][c][o];
                desc[idx++] = static_cast<float>(v);
                norm_sq += v * v;
            }
        }
    }
    if (norm_sq < 1e-24) return reject(RejectReason::DegenerateDescriptor);

    float norm = static_cast<float>(std::sqrt(norm_sq));
    for (auto& v : desc) v = std::min(v / norm, 0.2f);
    norm_sq = 0.0;
    for (const auto& v : desc) norm_sq += static_cast<double>(v) * v;
    norm = static_cast<float>(std::sqrt(norm_sq));
    if (norm < 1e-12f) return reject(RejectReason::DegenerateDescriptor);
    for (auto& v : desc) v /= norm;
    return desc;
}

BBox padded_crop_box(const BBox& bbox, int frame_w, int frame_h, double margin) {
    const int mx = static_cast<int>(std::lround(bbox.w * margin));
    const int my = static_cast<int>(std::lround(bbox.h * margin));
    BBox out;
    out.x = std::max(0, bbox.x - mx);
    out.y = std::max(0, bbox.y - my);
    out.w = std::min(frame_w, bbox.x + bbox.w + mx) - out.x;
    out.h = std::min(frame_h, bbox.y + bbox.h + my) - out.y;
    return out;
}

std::vector<Feature> extract(const GrayImage& frame, const Detection& det, int detection_index,
                             const SiftConfig& cfg) {
    const BBox crop = padded_crop_box(det.bbox, frame.width, frame.height, cfg.crop_margin);
    if (crop.w < 16 || crop.h < 16) return {};

    GrayImage patch(crop.w, crop.h);
    for (int y = 0; y < crop.h; y++)
        for (int x = 0; x < crop.w; x++) patch.at(x, y) = frame.at(crop.x + x, crop.y + y);

    const ScaleSpacePyramid pyr = build_gaussian_pyramid(patch, cfg);
    const DoGPyramid dog = build_dog_pyramid(pyr);
    const double floor = 0.5 * cfg.contrast_threshold / cfg.intervals;
    const auto candidates = detect_candidates(dog, floor);

    std::vector<Feature> features;
    for (const auto& cand : candidates) {
        auto refined = refine_and_filter(cand, dog, cfg);
        if (!refined) continue;
        for (const auto& kp : assign_orientations(*refined, pyr, cfg)) {
            auto desc = compute_descriptor(kp, pyr, cfg);
            if (!desc) continue;
            Feature f;
            f.keypoint = kp;
            f.keypoint.x += crop.x;
            f.keypoint.y += crop.y;
            f.keypoint.detection_index = detection_index;
            f.descriptor = *desc;
            features.push_back(std::move(f));
        }
    }

    auto canonical = [](const Feature& a, const Feature& b) {
        const Keypoint &ka = a.keypoint, &kb = b.keypoint;
        return std::tie(ka.octave, ka.level, ka.y, ka.x, ka.orientation) <
               std::tie(kb.octave, kb.level, kb.y, kb.x, kb.orientation);
    };
    if (cfg.max_features > 0 && static_cast<int>(features.size()) > cfg.max_features) {
        std::sort(features.begin(), features.end(), [&](const Feature& a, const Feature& b) {
            if (a.keypoint.response != b.keypoint.response)
                return a.keypoint.response > b.keypoint.response;
            return canonical(a, b);
        });
        features.resize(cfg.max_features);
    }
    std::sort(features.begin(), features.end(), canonical);
    return features;
}

}  // namespace spotmatch
