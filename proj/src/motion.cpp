#include "regtrack/motion.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace regtrack {

void EccConfig::validate() const {
  if (pyramid_levels < 1) {
    throw std::invalid_argument("ecc: pyramid_levels must be >= 1");
  }
  if (max_iterations < 1) {
    throw std::invalid_argument("ecc: max_iterations must be >= 1");
  }
  if (!(eps > 0.0)) {
    throw std::invalid_argument("ecc: eps must be > 0");
  }
}

namespace {

// 5-tap binomial blur followed by keeping even rows and columns.
GrayImage downsample(const GrayImage& src) {
  static constexpr float k[5] = {1.0f / 16, 4.0f / 16, 6.0f / 16, 4.0f / 16, 1.0f / 16};
  const int w = src.width();
  const int h = src.height();
  GrayImage tmp(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float s = 0.0f;
      for (int i = -2; i <= 2; ++i) {
        s += k[i + 2] * src.at(std::clamp(x + i, 0, w - 1), y);
      }
      tmp.at(x, y) = s;
    }
  }
  const int dw = (w + 1) / 2;
  const int dh = (h + 1) / 2;
  GrayImage out(dw, dh);
  for (int y = 0; y < dh; ++y) {
    for (int x = 0; x < dw; ++x) {
      float s = 0.0f;
      for (int i = -2; i <= 2; ++i) {
        s += k[i + 2] * tmp.at(2 * x, std::clamp(2 * y + i, 0, h - 1));
      }
      out.at(x, y) = std::clamp(s, 0.0f, 1.0f);
    }
  }
  return out;
}

struct Gradients {
  std::vector<float> gx;
  std::vector<float> gy;
};

Gradients gradients(const GrayImage& img) {
  const int w = img.width();
  const int h = img.height();
  Gradients g{std::vector<float>(static_cast<std::size_t>(w) * h),
              std::vector<float>(static_cast<std::size_t>(w) * h)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int xl = std::max(x - 1, 0);
      const int xr = std::min(x + 1, w - 1);
      const int yu = std::max(y - 1, 0);
      const int yd = std::min(y + 1, h - 1);
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      g.gx[i] = xr > xl ? (img.at(xr, y) - img.at(xl, y)) / static_cast<float>(xr - xl) : 0.0f;
      g.gy[i] = yd > yu ? (img.at(x, yd) - img.at(x, yu)) / static_cast<float>(yd - yu) : 0.0f;
    }
  }
  return g;
}

// Warp parameters: euclidean (theta, tx, ty) or the six affine entries.
struct WarpParams {
  TransformKind kind{TransformKind::euclidean};
  std::array<double, 6> p{};

  int count() const { return kind == TransformKind::euclidean ? 3 : 6; }

  static WarpParams identity(TransformKind kind) {
    WarpParams w;
    w.kind = kind;
    if (kind == TransformKind::affine) {
      w.p = {1, 0, 0, 0, 1, 0};
    }
    return w;
  }

  Transform2D transform() const {
    if (kind == TransformKind::euclidean) {
      return Transform2D::rigid(p[0], p[1], p[2]);
    }
    return Transform2D::affine(p);
  }

  void scale_translation(double f) {
    if (kind == TransformKind::euclidean) {
      p[1] *= f;
      p[2] *= f;
    } else {
      p[2] *= f;
      p[5] *= f;
    }
  }
};

struct LevelOutcome {
  WarpParams params;
  double rho{-2.0};
  bool converged{false};
  int iterations{0};
};

LevelOutcome align_level(const GrayImage& tmpl, const GrayImage& img, WarpParams params,
                         const EccConfig& cfg) {
  const int w = img.width();
  const int h = img.height();
  const int np = params.count();
  const auto grad = gradients(img);
  auto sample = [w](const std::vector<float>& buf, double x, double y) {
    const int x0 = std::min(static_cast<int>(x), w - 2);
    const int y0 = static_cast<int>(y);
    const double fx = x - x0;
    const double fy = y - y0;
    const std::size_t i = static_cast<std::size_t>(y0) * w + x0;
    const std::size_t j = fy > 0.0 ? i + w : i;
    const double top = buf[i] * (1.0 - fx) + buf[i + 1] * fx;
    const double bot = buf[j] * (1.0 - fx) + buf[j + 1] * fx;
    return top * (1.0 - fy) + bot * fy;
  };
  const std::vector<float> img_px(img.pixels().begin(), img.pixels().end());

  const std::size_t n = static_cast<std::size_t>(tmpl.width()) * tmpl.height();
  std::vector<std::size_t> idx;
  std::vector<double> iw, gxw, gyw;
  idx.reserve(n);
  iw.reserve(n);
  gxw.reserve(n);
  gyw.reserve(n);

  LevelOutcome best{params, -2.0, false, 0};
  double last_rho = -2.0;
  LevelOutcome out{params, -2.0, false, 0};

  for (int iter = 1; iter <= cfg.max_iterations; ++iter) {
    out.iterations = iter;
    const Transform2D t = params.transform();
    idx.clear();
    iw.clear();
    gxw.clear();
    gyw.clear();
    double t_sum = 0.0;
    double i_sum = 0.0;
    for (int y = 0; y < tmpl.height(); ++y) {
      for (int x = 0; x < tmpl.width(); ++x) {
        const Point2 q = t.apply({static_cast<double>(x), static_cast<double>(y)});
        if (!(q.x >= 0.0 && q.y >= 0.0 && q.x <= w - 1 && q.y <= h - 1)) {
          continue;
        }
        const std::size_t k = static_cast<std::size_t>(y) * tmpl.width() + x;
        idx.push_back(k);
        const double v = sample(img_px, q.x, q.y);
        iw.push_back(v);
        gxw.push_back(sample(grad.gx, q.x, q.y));
        gyw.push_back(sample(grad.gy, q.x, q.y));
        t_sum += tmpl.pixels()[k];
        i_sum += v;
      }
    }
    if (idx.size() <= static_cast<std::size_t>(np) * 4) {
      break;
    }
    const double cnt = static_cast<double>(idx.size());
    const double t_mean = t_sum / cnt;
    const double i_mean = i_sum / cnt;

    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(np, np);
    Eigen::VectorXd img_proj = Eigen::VectorXd::Zero(np);
    Eigen::VectorXd tmpl_proj = Eigen::VectorXd::Zero(np);
    double tt = 0.0, ii = 0.0, ti = 0.0;
    const double c = std::cos(params.p[0]);
    const double s = std::sin(params.p[0]);
    double jac[6];
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const double x = static_cast<double>(idx[r] % tmpl.width());
      const double y = static_cast<double>(idx[r] / tmpl.width());
      const double gx = gxw[r];
      const double gy = gyw[r];
      if (params.kind == TransformKind::euclidean) {
        jac[0] = gx * (-s * x - c * y) + gy * (c * x - s * y);
        jac[1] = gx;
        jac[2] = gy;
      } else {
        jac[0] = gx * x;
        jac[1] = gx * y;
        jac[2] = gx;
        jac[3] = gy * x;
        jac[4] = gy * y;
        jac[5] = gy;
      }
      const double tz = tmpl.pixels()[idx[r]] - t_mean;
      const double iz = iw[r] - i_mean;
      tt += tz * tz;
      ii += iz * iz;
      ti += tz * iz;
      for (int a = 0; a < np; ++a) {
        img_proj[a] += jac[a] * iz;
        tmpl_proj[a] += jac[a] * tz;
        for (int b = a; b < np; ++b) {
          hess(a, b) += jac[a] * jac[b];
        }
      }
    }
    for (int a = 0; a < np; ++a) {
      for (int b = 0; b < a; ++b) {
        hess(a, b) = hess(b, a);
      }
    }
    if (tt <= 0.0 || ii <= 0.0) {
      break;
    }
    const double rho = ti / std::sqrt(tt * ii);
    if (rho > best.rho) {
      best.params = params;
      best.rho = rho;
    }
    out.params = params;
    out.rho = rho;
    if (iter > 1 && std::abs(rho - last_rho) < cfg.eps) {
      out.converged = true;
      return out;
    }
    last_rho = rho;

    const auto ldlt = hess.ldlt();
    if (ldlt.info() != Eigen::Success) {
      break;
    }
    const Eigen::VectorXd hinv_ip = ldlt.solve(img_proj);
    const double lambda_n = ii - img_proj.dot(hinv_ip);
    const double lambda_d = ti - tmpl_proj.dot(hinv_ip);
    if (!(lambda_d > 0.0)) {
      break;
    }
    const double lambda = lambda_n / lambda_d;
    const Eigen::VectorXd delta = ldlt.solve(lambda * tmpl_proj - img_proj);
    if (!delta.allFinite()) {
      break;
    }
    for (int a = 0; a < np; ++a) {
      params.p[a] += delta[a];
    }
  }
  best.iterations = out.iterations;
  best.converged = false;
  return best;
}

}  // namespace

EccResult ecc_align(const GrayImage& prev, const GrayImage& cur, const EccConfig& cfg) {
  cfg.validate();
  if (prev.width() != cur.width() || prev.height() != cur.height()) {
    throw std::invalid_argument("ecc_align: image sizes differ");
  }
  if (prev.width() < 2 || prev.height() < 2) {
    throw std::invalid_argument("ecc_align: images smaller than 2x2");
  }
  if (prev.variance() <= 0.0 || cur.variance() <= 0.0) {
    throw std::invalid_argument("ecc_align: constant image");
  }

  std::vector<GrayImage> prev_pyr{prev};
  std::vector<GrayImage> cur_pyr{cur};
  while (static_cast<int>(prev_pyr.size()) < cfg.pyramid_levels &&
         std::min(prev_pyr.back().width(), prev_pyr.back().height()) >= 64) {
    prev_pyr.push_back(downsample(prev_pyr.back()));
    cur_pyr.push_back(downsample(cur_pyr.back()));
  }

  WarpParams params = WarpParams::identity(cfg.mode);
  EccResult result;
  for (int level = static_cast<int>(prev_pyr.size()) - 1; level >= 0; --level) {
    if (prev_pyr[level].variance() <= 0.0 || cur_pyr[level].variance() <= 0.0) {
      continue;
    }
    const auto outcome = align_level(prev_pyr[level], cur_pyr[level], params, cfg);
    params = outcome.params;
    result.iterations += outcome.iterations;
    result.correlation = outcome.rho;
    result.converged = outcome.converged;
    if (level > 0) {
      params.scale_translation(2.0);
    }
  }
  result.transform = params.transform();
  return result;
}

std::vector<std::optional<BoundingBox>> apply_cmc(std::span<const BoundingBox> boxes,
                                                  const Transform2D& t, double frame_w,
                                                  double frame_h) {
  std::vector<std::optional<BoundingBox>> out(boxes.begin(), boxes.end());
  if (t.is_exact_identity()) {
    return out;
  }
  if (!t.valid()) {
    throw InvalidTransformError("apply_cmc: invalid transform");
  }
  for (auto& b : out) {
    b = clip_to_frame(warp_box(*b, t), frame_w, frame_h);
  }
  return out;
}

Point2 cva_velocity(const Track& track) {
  if (track.boxes.size() < 2) {
    return {};
  }
  const Point2 a = track.boxes[track.boxes.size() - 2].box.center();
  const Point2 b = track.boxes.back().box.center();
  return {b.x - a.x, b.y - a.y};
}

BoundingBox cva_predict(const Track& track) {
  const Point2 v = cva_velocity(track);
  return track.last_box().translated(v.x, v.y);
}

std::optional<Transform2D> FixedCameraMotion::motion(FrameIndex frame) {
  const auto it = transforms_.find(frame);
  if (it == transforms_.end()) {
    return std::nullopt;
  }
  return it->second;
}

EccCameraMotion::EccCameraMotion(Loader loader, EccConfig cfg)
    : loader_(std::move(loader)), cfg_(cfg) {
  cfg_.validate();
}

EccCameraMotion::Loader EccCameraMotion::file_loader(
    std::function<std::optional<std::filesystem::path>(FrameIndex)> path) {
  return [path = std::move(path)](FrameIndex frame) {
    const auto p = path(frame);
    if (!p) {
      throw std::runtime_error("sequence has no image directory");
    }
    return load_gray_image(*p);
  };
}

std::string EccCameraMotion::identity() const {
  return std::string("ecc(") + (cfg_.mode == TransformKind::euclidean ? "euclidean" : "affine") +
         ",levels=" + std::to_string(cfg_.pyramid_levels) +
         ",iters=" + std::to_string(cfg_.max_iterations) + ')';
}

std::optional<GrayImage> EccCameraMotion::load(FrameIndex frame) {
  if (cached_ && cached_->first == frame) {
    return cached_->second;
  }
  try {
    return loader_(frame);
  } catch (const std::exception& e) {
    disabled_ = true;
    warning_ = std::string(e.what()) + "; camera motion compensation disabled";
    return std::nullopt;
  }
}

std::optional<Transform2D> EccCameraMotion::motion(FrameIndex frame) {
  if (disabled_ || frame <= 1) {
    return std::nullopt;
  }
  auto prev = load(frame - 1);
  if (!prev) {
    return std::nullopt;
  }
  auto cur = load(frame);
  if (!cur) {
    return std::nullopt;
  }
  cached_.emplace(frame, *cur);
  if (prev->width() != cur->width() || prev->height() != cur->height()) {
    return std::nullopt;
  }
  try {
    return ecc_align(*prev, *cur, cfg_).transform;
  } catch (const std::invalid_argument&) {
    return std::nullopt;
  }
}

}  // namespace regtrack
