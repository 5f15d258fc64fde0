#include "sdfa/sdfa.h"

#include <cstring>
#include <string>

#include "json.hpp"
#include "sdfa/errors.hpp"
#include "sdfa/experiment.hpp"

struct sdfa_dataset {
  sdfa::DatasetBundle bundle;
};

namespace {

thread_local std::string g_last_error;

template <class F>
sdfa_status guarded(F&& fn) {
  g_last_error.clear();
  try {
    fn();
    return SDFA_OK;
  } catch (const sdfa::Error& e) {
    g_last_error = e.what();
    return static_cast<sdfa_status>(e.code());
  } catch (const nlohmann::json::exception& e) {
    g_last_error = std::string("validation error: malformed JSON: ") + e.what();
    return SDFA_ERR_VALIDATION;
  } catch (const std::filesystem::filesystem_error& e) {
    g_last_error = std::string("io error: ") + e.what();
    return SDFA_ERR_IO;
  } catch (const std::exception& e) {
    g_last_error = std::string("validation error: ") + e.what();
    return SDFA_ERR_VALIDATION;
  }
}

void require(const void* p, const char* what) {
  if (!p) throw sdfa::ArgumentError(std::string(what) + " is NULL");
}

sdfa::ExperimentConfig parse_config(const char* text) {
  require(text, "config_json");
  return sdfa::config_from_json(nlohmann::json::parse(text));
}

sdfa::SyntheticSpec parse_spec(const char* text) {
  sdfa::SyntheticSpec s;
  if (!text || !*text) return s;
  const auto j = nlohmann::json::parse(text);
  if (!j.is_object()) throw sdfa::ArgumentError("synthetic spec must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (k == "d_a") s.d_a = v.get<int>();
    else if (k == "d_x") s.d_x = v.get<int>();
    else if (k == "m_true") s.m_true = v.get<int>();
    else if (k == "n_seen_classes") s.n_seen_classes = v.get<int>();
    else if (k == "n_unseen_classes") s.n_unseen_classes = v.get<int>();
    else if (k == "instances_per_class") s.instances_per_class = v.get<int>();
    else if (k == "p_miss") s.p_miss = v.get<double>();
    else if (k == "noise_sigma") s.noise_sigma = v.get<double>();
    else if (k == "seed") s.seed = v.get<std::uint64_t>();
    else if (k == "d_w") s.d_w = v.get<int>();
    else if (k == "embedding_jitter") s.embedding_jitter = v.get<double>();
    else throw sdfa::ArgumentError("unknown synthetic spec key '" + k + "'");
  }
  return s;
}

}  // namespace

extern "C" {

const char* sdfa_version(void) { return "1.0.0"; }

const char* sdfa_last_error(void) { return g_last_error.c_str(); }

sdfa_status sdfa_make_synthetic(const char* spec_json, const char* out_dir, char* manifest_out, size_t cap) {
  return guarded([&] {
    require(out_dir, "out_dir");
    const auto path = sdfa::cmd_make_synthetic(parse_spec(spec_json), out_dir).string();
    if (manifest_out && cap > 0) {
      const std::size_t n = std::min(cap - 1, path.size());
      std::memcpy(manifest_out, path.data(), n);
      manifest_out[n] = '\0';
    }
  });
}

sdfa_status sdfa_dataset_load(const char* manifest_path, sdfa_dataset** out) {
  return guarded([&] {
    require(manifest_path, "manifest_path");
    require(out, "out");
    *out = nullptr;
    auto ds = std::make_unique<sdfa_dataset>();
    ds->bundle = sdfa::load_dataset(manifest_path);
    *out = ds.release();
  });
}

void sdfa_dataset_free(sdfa_dataset* ds) { delete ds; }

sdfa_status sdfa_dataset_info_get(const sdfa_dataset* ds, sdfa_dataset_info* out) {
  return guarded([&] {
    require(ds, "dataset");
    require(out, "out");
    const auto& b = ds->bundle;
    out->n_instances = b.features.rows();
    out->d_x = b.d_x();
    out->d_a = b.d_a();
    out->n_seen_classes = static_cast<int64_t>(b.seen_classes.size());
    out->n_unseen_classes = static_cast<int64_t>(b.unseen_classes.size());
    out->has_embeddings = b.embeddings.has_value() ? 1 : 0;
  });
}

sdfa_status sdfa_dataset_save(const sdfa_dataset* ds, const char* out_dir) {
  return guarded([&] {
    require(ds, "dataset");
    require(out_dir, "out_dir");
    sdfa::save_dataset(ds->bundle, out_dir);
  });
}

sdfa_status sdfa_cluster(const char* config_json) {
  return guarded([&] { sdfa::cmd_cluster(parse_config(config_json)); });
}

sdfa_status sdfa_run(const char* config_json, sdfa_metrics* out) {
  return guarded([&] {
    const auto r = sdfa::cmd_run(parse_config(config_json));
    if (out) *out = sdfa_metrics{r.metrics.U, r.metrics.S, r.metrics.H, r.self_sup_accuracy};
  });
}

sdfa_status sdfa_ablate(const char* config_json, int n_seeds) {
  return guarded([&] { sdfa::cmd_ablate(parse_config(config_json), n_seeds); });
}

sdfa_status sdfa_sweep(const char* config_json, const char* param, const double* values, size_t n_values,
                       int n_seeds) {
  return guarded([&] {
    require(param, "param");
    if (n_values > 0) require(values, "values");
    sdfa::cmd_sweep(parse_config(config_json), param, std::vector<double>(values, values + n_values), n_seeds);
  });
}

sdfa_status sdfa_report(const char* run_dir) {
  return guarded([&] {
    require(run_dir, "run_dir");
    sdfa::cmd_report(run_dir);
  });
}

sdfa_status sdfa_harmonic_mean(double seen, double unseen, double* out) {
  return guarded([&] {
    require(out, "out");
    *out = sdfa::harmonic_mean(seen, unseen);
  });
}

}  // extern "C"
