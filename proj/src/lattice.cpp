#include "corrlab/lattice.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace corrlab {

Torus::Torus(int dim, int side) : dim_(dim), side_(side) {
  if (dim < 2) throw std::invalid_argument("torus: dim must be >= 2");
  if (side < 2) throw std::invalid_argument("torus: side must be >= 2");
  sites_ = 1;
  strides_.resize(dim);
  for (int k = 0; k < dim; ++k) {
    strides_[k] = sites_;
    sites_ *= side;
    if (sites_ > (int64_t(1) << 31))
      throw std::invalid_argument("torus: site count exceeds 2^31");
  }
  neighbors_.resize(static_cast<size_t>(2 * dim_ * sites_));
  std::vector<int> x(dim_);
  for (int64_t s = 0; s < sites_; ++s) {
    coords(s, x.data());
    for (int axis = 0; axis < dim_; ++axis) {
      const int64_t up = s + ((x[axis] + 1 == side_) ? (1 - side_) : 1) * strides_[axis];
      const int64_t dn = s + ((x[axis] == 0) ? (side_ - 1) : -1) * strides_[axis];
      neighbors_[2 * dim_ * s + 2 * axis] = static_cast<int32_t>(up);
      neighbors_[2 * dim_ * s + 2 * axis + 1] = static_cast<int32_t>(dn);
    }
  }
}

void Torus::coords(int64_t site, int* out) const {
  for (int k = 0; k < dim_; ++k) {
    out[k] = static_cast<int>((site / strides_[k]) % side_);
  }
}

int64_t Torus::site_at(std::span<const int> x) const {
  if (static_cast<int>(x.size()) != dim_)
    throw std::invalid_argument("site_at: wrong coordinate count");
  int64_t s = 0;
  for (int k = 0; k < dim_; ++k) {
    int c = x[k] % side_;
    if (c < 0) c += side_;
    s += c * strides_[k];
  }
  return s;
}

double Torus::torus_dist(int64_t site) const {
  std::vector<int> x(dim_);
  coords(site, x.data());
  double r2 = 0.0;
  for (int k = 0; k < dim_; ++k) {
    int c = x[k];
    if (c > side_ / 2) c -= side_;
    r2 += double(c) * double(c);
  }
  return std::sqrt(r2);
}

TorusPtr make_torus(int dim, int side) { return std::make_shared<Torus>(dim, side); }

double ScalarField::mean() const {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

void ScalarField::subtract_mean() {
  const double m = mean();
  for (double& x : v) x -= m;
}

EdgeField gradient(const ScalarField& f) {
  EdgeField g(f.torus);
  const Torus& T = *f.torus;
  const int d = T.dim();
  for (int64_t s = 0; s < T.sites(); ++s) {
    const double fs = f.v[s];
    for (int axis = 0; axis < d; ++axis) {
      g.v[s * d + axis] = f.v[T.neighbor(s, axis, +1)] - fs;
    }
  }
  return g;
}

ScalarField divergence(const EdgeField& F) {
  ScalarField out(F.torus);
  const Torus& T = *F.torus;
  const int d = T.dim();
  for (int64_t s = 0; s < T.sites(); ++s) {
    double acc = 0.0;
    for (int axis = 0; axis < d; ++axis) {
      const int64_t below = T.neighbor(s, axis, -1);
      acc += F.v[below * d + axis] - F.v[s * d + axis];
    }
    out.v[s] = acc;
  }
  return out;
}

void apply_elliptic_into(double mu, const EdgeField& a, const ScalarField& u,
                         ScalarField& out) {
  const Torus& T = *u.torus;
  const int d = T.dim();
  for (int64_t s = 0; s < T.sites(); ++s) {
    const double us = u.v[s];
    double acc = mu * us;
    for (int axis = 0; axis < d; ++axis) {
      const int64_t up = T.neighbor(s, axis, +1);
      const int64_t dn = T.neighbor(s, axis, -1);
      // flux balance of a*grad(u) at s
      acc += a.v[dn * d + axis] * (us - u.v[dn]) + a.v[s * d + axis] * (us - u.v[up]);
    }
    out.v[s] = acc;
  }
}

ScalarField apply_elliptic(double mu, const EdgeField& a, const ScalarField& u) {
  if (a.torus->sites() != u.torus->sites() || a.torus->dim() != u.torus->dim())
    throw std::invalid_argument("apply_elliptic: geometry mismatch");
  for (double c : a.v)
    if (!(c > 0.0)) throw std::invalid_argument("apply_elliptic: conductance must be positive");
  ScalarField out(u.torus);
  apply_elliptic_into(mu, a, u, out);
  return out;
}

double dot(const ScalarField& a, const ScalarField& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.v.size(); ++i) s += a.v[i] * b.v[i];
  return s;
}

double dot_edges(const EdgeField& a, const EdgeField& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.v.size(); ++i) s += a.v[i] * b.v[i];
  return s;
}

bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

namespace {

void save_raw(const TorusPtr& torus, std::span<const double> v, const char* kind,
              const std::string& basepath) {
  if (!all_finite(v)) throw std::runtime_error("save_field: non-finite entries");
  nlohmann::json hdr;
  hdr["dim"] = torus->dim();
  hdr["side"] = torus->side();
  hdr["kind"] = kind;
  hdr["index_convention"] = "site-major axis0-fastest; edge = site*dim + axis";
  hdr["count"] = v.size();
  std::ofstream jh(basepath + ".json");
  if (!jh) throw std::runtime_error("save_field: cannot open " + basepath + ".json");
  jh << hdr.dump(2) << "\n";
  std::ofstream bin(basepath + ".bin", std::ios::binary);
  if (!bin) throw std::runtime_error("save_field: cannot open " + basepath + ".bin");
  bin.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

nlohmann::json load_header(const std::string& basepath, const char* kind) {
  std::ifstream jh(basepath + ".json");
  if (!jh) throw std::runtime_error("load_field: cannot open " + basepath + ".json");
  nlohmann::json hdr = nlohmann::json::parse(jh);
  if (hdr.at("kind").get<std::string>() != kind)
    throw std::runtime_error("load_field: kind mismatch in " + basepath);
  return hdr;
}

void load_raw(std::vector<double>& v, size_t count, const std::string& basepath) {
  std::ifstream bin(basepath + ".bin", std::ios::binary);
  if (!bin) throw std::runtime_error("load_field: cannot open " + basepath + ".bin");
  v.resize(count);
  bin.read(reinterpret_cast<char*>(v.data()),
           static_cast<std::streamsize>(count * sizeof(double)));
  if (static_cast<size_t>(bin.gcount()) != count * sizeof(double))
    throw std::runtime_error("load_field: truncated binary " + basepath);
  if (!all_finite(v)) throw std::runtime_error("load_field: non-finite entries");
}

}  // namespace

void save_field(const ScalarField& f, const std::string& basepath) {
  save_raw(f.torus, f.v, "site", basepath);
}

void save_field(const EdgeField& f, const std::string& basepath) {
  save_raw(f.torus, f.v, "edge", basepath);
}

ScalarField load_scalar_field(const std::string& basepath) {
  auto hdr = load_header(basepath, "site");
  ScalarField f(make_torus(hdr.at("dim").get<int>(), hdr.at("side").get<int>()));
  load_raw(f.v, static_cast<size_t>(f.torus->sites()), basepath);
  return f;
}

EdgeField load_edge_field(const std::string& basepath) {
  auto hdr = load_header(basepath, "edge");
  EdgeField f(make_torus(hdr.at("dim").get<int>(), hdr.at("side").get<int>()));
  load_raw(f.v, static_cast<size_t>(f.torus->edges()), basepath);
  return f;
}

}  // namespace corrlab
