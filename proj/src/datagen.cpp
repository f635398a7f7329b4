#include "flicker/datagen.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "flicker/errors.hpp"
#include "flicker/parallel.hpp"

namespace flicker::datagen {

namespace fs = std::filesystem;

namespace {

constexpr const char* kLabel0File = "samples_label0.f32";
constexpr const char* kLabel1File = "samples_label1.f32";

double largest_positive_root(const dynamics::PolyDrift& drift) {
  const auto roots = dynamics::equilibria(dynamics::Drift{drift});
  for (auto it = roots.rbegin(); it != roots.rend(); ++it)
    if (*it > 0) return *it;
  throw NumericError("drift has no positive equilibrium at p0");
}

std::uint64_t retry_seed(std::uint64_t seed, int attempt) {
  return seed + 0xA24BAED4963EE407ull * static_cast<std::uint64_t>(attempt);
}

}  // namespace

dynamics::PolyDrift sample_coefficients(Rng& rng, double p0, int max_retries) {
  for (int attempt = 0; attempt < max_retries; ++attempt) {
    dynamics::PolyDrift drift;
    drift.g = rng.uniform_open(-2.0, 0.0);
    drift.f = rng.uniform_open(-std::abs(drift.g), std::abs(drift.g));
    drift.e = rng.uniform_open(-2.0, 0.0);
    drift.d = rng.uniform_open(-std::abs(drift.e), std::abs(drift.e));
    drift.c = rng.uniform_open(-2.0, 0.0);
    drift.b = 0.0;
    drift.a = rng.uniform_open(1.0, 3.0);
    drift.p = p0;
    try {
      (void)largest_positive_root(drift);
      (void)dynamics::critical_point(drift);
      return drift;
    } catch (const NumericError&) {
      // no usable fold; redraw
    }
  }
  throw NumericError("sample_coefficients: retry budget exhausted");
}

LabeledSample make_sample(const dynamics::PolyDrift& coeffs, std::size_t length,
                          int label, std::uint64_t seed, std::size_t var_window,
                          double sigma_factor, int sim_retries) {
  if (label != 0 && label != 1) throw DataError("make_sample: label must be 0 or 1");
  if (length < 2) throw DataError("make_sample: length must be >= 2");
  if (var_window > length)
    throw DataError("make_sample: var_window exceeds sample length");

  LabeledSample sample;
  sample.label = label;
  sample.length = length;
  sample.coeffs = coeffs;
  sample.x0 = largest_positive_root(coeffs);
  sample.sigma = sigma_factor * sample.x0;
  sample.p_star = dynamics::critical_point(coeffs).p_star;

  const auto param = label == 1
                         ? dynamics::Schedule::linear_ramp(coeffs.p, sample.p_star)
                         : dynamics::Schedule::constant(coeffs.p);
  const auto noise = dynamics::Schedule::constant(sample.sigma);

  for (int attempt = 0;; ++attempt) {
    const std::uint64_t attempt_seed = retry_seed(seed, attempt);
    try {
      const auto traj =
          dynamics::simulate(dynamics::Drift{coeffs}, param, noise, sample.x0,
                             length - 1, 0.01, attempt_seed);
      sample.gen_seed = attempt_seed;
      sample.channels = features::assemble_channels(traj.values, var_window);
      return sample;
    } catch (const NumericError&) {
      if (attempt + 1 >= sim_retries) throw;
    }
  }
}

dynamics::Trajectory regenerate_raw(const LabeledSample& sample) {
  const auto param =
      sample.label == 1
          ? dynamics::Schedule::linear_ramp(sample.coeffs.p, sample.p_star)
          : dynamics::Schedule::constant(sample.coeffs.p);
  return dynamics::simulate(dynamics::Drift{sample.coeffs}, param,
                            dynamics::Schedule::constant(sample.sigma),
                            sample.x0, sample.length - 1, 0.01, sample.gen_seed);
}

namespace {

void write_f32(std::ofstream& out, const std::vector<float>& buf) {
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

std::string csv_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void build_dataset(const DatasetManifest& manifest, const std::string& out_dir,
                   int threads, bool csv_export) {
  if (manifest.count_per_class < 1)
    throw DataError("build_dataset: count_per_class must be >= 1");
  if (manifest.var_window > manifest.native_length)
    throw DataError("build_dataset: var_window exceeds native_length");
  fs::create_directories(out_dir);

  const std::size_t n = manifest.count_per_class;
  const std::size_t L = manifest.native_length;
  const std::size_t per_sample = 2 * L;

  // label 1 uses sample-stream seeds base+i, label 0 uses base+n+i.
  std::vector<LabeledSample> meta(2 * n);
  std::vector<float> payload0(n * per_sample), payload1(n * per_sample);

  parallel_for(2 * n, threads, [&](std::size_t job) {
    const int label = job < n ? 1 : 0;
    const std::size_t idx = job < n ? job : job - n;
    Rng stream(manifest.base_seed + job);
    const auto coeffs = sample_coefficients(stream, manifest.p0);
    const std::uint64_t sim_seed = stream.next_u64();
    LabeledSample sample =
        make_sample(coeffs, L, label, sim_seed, manifest.var_window,
                    manifest.sigma_factor);
    std::vector<float>& payload = label == 1 ? payload1 : payload0;
    float* at = payload.data() + idx * per_sample;
    for (std::size_t t = 0; t < L; ++t) at[t] = static_cast<float>(sample.channels.raw[t]);
    for (std::size_t t = 0; t < L; ++t) at[L + t] = static_cast<float>(sample.channels.rollvar[t]);
    if (!csv_export) {  // channels already serialized; drop the bulky copy
      sample.channels.raw.clear();
      sample.channels.rollvar.clear();
    }
    meta[job] = std::move(sample);
  });

  {
    std::ofstream f0(fs::path(out_dir) / kLabel0File, std::ios::binary);
    std::ofstream f1(fs::path(out_dir) / kLabel1File, std::ios::binary);
    if (!f0 || !f1) throw DataError("build_dataset: cannot write sample files");
    write_f32(f0, payload0);
    write_f32(f1, payload1);
  }

  {
    std::ofstream csv(fs::path(out_dir) / "samples.csv");
    csv << "index,label,seed,a,b,c,d,e,f,g,x0,sigma,p_star\n";
    for (std::size_t label_pass = 0; label_pass < 2; ++label_pass) {
      for (std::size_t i = 0; i < n; ++i) {
        const auto& s = meta[label_pass == 0 ? n + i : i];  // label 0 first
        const auto& c = s.coeffs;
        csv << i << "," << s.label << "," << s.gen_seed << "," << csv_g17(c.a)
            << "," << csv_g17(c.b) << "," << csv_g17(c.c) << "," << csv_g17(c.d)
            << "," << csv_g17(c.e) << "," << csv_g17(c.f) << "," << csv_g17(c.g)
            << "," << csv_g17(s.x0) << "," << csv_g17(s.sigma) << ","
            << csv_g17(s.p_star) << "\n";
      }
    }
  }

  {
    std::ofstream mf(fs::path(out_dir) / "manifest.txt");
    mf << "format=flicker-ews-dataset v1\n"
       << "native_length=" << manifest.native_length << "\n"
       << "count_per_class=" << manifest.count_per_class << "\n"
       << "var_window=" << manifest.var_window << "\n"
       << "base_seed=" << manifest.base_seed << "\n"
       << "p0=" << csv_g17(manifest.p0) << "\n"
       << "sigma_rule=" << csv_g17(manifest.sigma_factor) << "*x0\n"
       << "coeff_ranges=g:U(-2,0) f:U(-|g|,|g|) e:U(-2,0) d:U(-|e|,|e|) "
          "c:U(-2,0) b:0 a:U(1,3)\n"
       << "files=" << kLabel0File << " " << kLabel1File << "\n"
       << "layout=per sample: z-scored raw channel then z-scored "
          "rolling-variance channel, float32 little-endian\n";
  }

  if (csv_export) {
    std::ofstream csv(fs::path(out_dir) / "channels.csv");
    csv << "label,sample,t,raw,rollvar\n";
    for (std::size_t label_pass = 0; label_pass < 2; ++label_pass) {
      for (std::size_t i = 0; i < n; ++i) {
        const auto& s = meta[label_pass == 0 ? n + i : i];
        for (std::size_t t = 0; t < L; ++t)
          csv << s.label << "," << i << "," << t << ","
              << csv_g17(s.channels.raw[t]) << ","
              << csv_g17(s.channels.rollvar[t]) << "\n";
      }
    }
  }
}

DatasetManifest read_manifest(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "manifest.txt");
  if (!in) throw DataError("dataset manifest not found in: " + dir);
  DatasetManifest m;
  std::string line;
  bool format_seen = false;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "format") {
      if (value != "flicker-ews-dataset v1")
        throw DataError("unsupported dataset format: " + value);
      format_seen = true;
    } else if (key == "native_length") {
      m.native_length = std::stoull(value);
    } else if (key == "count_per_class") {
      m.count_per_class = std::stoull(value);
    } else if (key == "var_window") {
      m.var_window = std::stoull(value);
    } else if (key == "base_seed") {
      m.base_seed = std::stoull(value);
    } else if (key == "p0") {
      m.p0 = std::stod(value);
    } else if (key == "sigma_rule") {
      m.sigma_factor = std::stod(value);  // leading factor of "<f>*x0"
    }
  }
  if (!format_seen) throw DataError("malformed dataset manifest in: " + dir);
  return m;
}

nn::Dataset load_dataset(const std::string& dir) {
  const DatasetManifest m = read_manifest(dir);
  const std::size_t L = m.native_length;
  const std::size_t n = m.count_per_class;
  const std::size_t per_sample = 2 * L;

  nn::Dataset data;
  data.length = static_cast<int>(L);
  data.inputs.resize(2 * n * per_sample);
  data.labels.resize(2 * n);

  std::vector<float> block(n * per_sample);
  for (int label = 0; label <= 1; ++label) {
    const fs::path path =
        fs::path(dir) / (label == 0 ? kLabel0File : kLabel1File);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("dataset file missing: " + path.string());
    in.read(reinterpret_cast<char*>(block.data()),
            static_cast<std::streamsize>(block.size() * sizeof(float)));
    if (in.gcount() != static_cast<std::streamsize>(block.size() * sizeof(float)))
      throw DataError("dataset file truncated: " + path.string());

    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t sample_idx = static_cast<std::size_t>(label) * n + i;
      data.labels[sample_idx] = label;
      const float* raw = block.data() + i * per_sample;
      const float* rollvar = raw + L;
      float* frames = data.inputs.data() + sample_idx * per_sample;
      for (std::size_t t = 0; t < L; ++t) {
        frames[2 * t] = raw[t];
        frames[2 * t + 1] = rollvar[t];
      }
    }
  }
  return data;
}

}  // namespace flicker::datagen
