#include "romkit/romkit.h"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <exception>
#include <new>
#include <string>

#include "romkit/config.hpp"
#include "romkit/error.hpp"
#include "romkit/harness.hpp"
#include "romkit/io.hpp"
#include "romkit/mlp.hpp"
#include "romkit/plant.hpp"
#include "romkit/pod.hpp"

struct romkit_config {
  romkit::ExperimentConfig value;
};

struct romkit_plant {
  romkit::plant::PlantConfig config;
};

struct romkit_basis {
  romkit::harness::PodModel model;
};

struct romkit_mlp {
  romkit::mlp::MlpParams params;
};

namespace {

thread_local std::string last_error;

romkit_status to_status(romkit::ErrorCategory c) {
  using romkit::ErrorCategory;
  switch (c) {
    case ErrorCategory::contract_violation: return ROMKIT_CONTRACT_VIOLATION;
    case ErrorCategory::configuration: return ROMKIT_CONFIGURATION;
    case ErrorCategory::numerical_domain: return ROMKIT_NUMERICAL_DOMAIN;
    case ErrorCategory::integration_blowup: return ROMKIT_INTEGRATION_BLOWUP;
    case ErrorCategory::steady_state_failure: return ROMKIT_STEADY_STATE_FAILURE;
    case ErrorCategory::numerical: return ROMKIT_NUMERICAL;
    case ErrorCategory::divergence: return ROMKIT_DIVERGENCE;
    case ErrorCategory::filter_divergence: return ROMKIT_FILTER_DIVERGENCE;
    case ErrorCategory::singular_update: return ROMKIT_SINGULAR_UPDATE;
    case ErrorCategory::missing_artifact: return ROMKIT_MISSING_ARTIFACT;
    case ErrorCategory::io: return ROMKIT_IO;
  }
  return ROMKIT_INTERNAL;
}

template <typename F>
romkit_status guarded(F&& body) {
  try {
    body();
    last_error.clear();
    return ROMKIT_OK;
  } catch (const romkit::Error& e) {
    last_error = e.what();
    return to_status(e.category());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return ROMKIT_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return ROMKIT_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  romkit::require(p != nullptr, std::string(what) + " must not be null");
}

Eigen::Map<const Eigen::VectorXd> view(const double* p, Eigen::Index n) { return {p, n}; }

void copy_out(const Eigen::VectorXd& v, double* out) { std::memcpy(out, v.data(), sizeof(double) * v.size()); }

}  // namespace

extern "C" {

const char* romkit_version(void) { return "0.1.0"; }

const char* romkit_status_name(romkit_status status) {
  switch (status) {
    case ROMKIT_OK: return "ok";
    case ROMKIT_INTERNAL: return "internal";
    default: break;
  }
  static const romkit::ErrorCategory all[] = {
      romkit::ErrorCategory::contract_violation, romkit::ErrorCategory::configuration,
      romkit::ErrorCategory::numerical_domain,   romkit::ErrorCategory::integration_blowup,
      romkit::ErrorCategory::steady_state_failure, romkit::ErrorCategory::numerical,
      romkit::ErrorCategory::divergence,         romkit::ErrorCategory::filter_divergence,
      romkit::ErrorCategory::singular_update,    romkit::ErrorCategory::missing_artifact,
      romkit::ErrorCategory::io};
  for (auto c : all)
    if (to_status(c) == status) return romkit::category_name(c).data();
  return "unknown";
}

const char* romkit_last_error(void) { return last_error.c_str(); }

romkit_status romkit_config_default(romkit_config** out) {
  return guarded([&] {
    need(out, "out");
    *out = new romkit_config{romkit::ExperimentConfig::defaults()};
  });
}

romkit_status romkit_config_load(const char* path, romkit_config** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new romkit_config{romkit::load_config(path)};
  });
}

romkit_status romkit_config_set_seed(romkit_config* config, uint64_t seed) {
  return guarded([&] {
    need(config, "config");
    config->value.seeds.base = seed;
  });
}

romkit_status romkit_config_set_output_dir(romkit_config* config, const char* dir) {
  return guarded([&] {
    need(config, "config");
    need(dir, "dir");
    config->value.output_dir = dir;
    config->value.validate();
  });
}

romkit_status romkit_config_set_filter(romkit_config* config, const char* filter) {
  return guarded([&] {
    need(config, "config");
    need(filter, "filter");
    auto updated = config->value;
    updated.estimator.filter = filter;
    updated.validate();
    config->value = updated;
  });
}

romkit_status romkit_config_use_fast_profile(romkit_config* config) {
  return guarded([&] {
    need(config, "config");
    config->value.apply_fast_profile();
  });
}

romkit_status romkit_config_describe(const romkit_config* config, char* buf, size_t capacity, size_t* needed) {
  return guarded([&] {
    need(config, "config");
    const std::string text = config->value.canonical();
    if (needed) *needed = text.size();
    if (buf && capacity > 0) {
      const size_t n = std::min(capacity - 1, text.size());
      std::memcpy(buf, text.data(), n);
      buf[n] = '\0';
    }
  });
}

void romkit_config_free(romkit_config* config) { delete config; }

romkit_status romkit_run(const romkit_config* config, const char* command) {
  return guarded([&] {
    need(config, "config");
    need(command, "command");
    romkit::harness::run_command(command, config->value);
  });
}

romkit_status romkit_plant_create(romkit_plant** out) {
  return guarded([&] {
    need(out, "out");
    *out = new romkit_plant{romkit::plant::PlantConfig::defaults()};
  });
}

size_t romkit_plant_state_dim(const romkit_plant*) { return romkit::plant::kStateDim; }

romkit_status romkit_plant_steady_state(const romkit_plant* plant, const double* u, double* x_out) {
  return guarded([&] {
    need(plant, "plant");
    need(u, "u");
    need(x_out, "x_out");
    copy_out(romkit::plant::steady_state(plant->config, view(u, romkit::plant::kInputDim)), x_out);
  });
}

romkit_status romkit_plant_derivative(const romkit_plant* plant, const double* x, const double* u, double* dx_out) {
  return guarded([&] {
    need(plant, "plant");
    need(x, "x");
    need(u, "u");
    need(dx_out, "dx_out");
    copy_out(romkit::plant::derivative(plant->config, view(x, romkit::plant::kStateDim),
                                       view(u, romkit::plant::kInputDim)),
             dx_out);
  });
}

romkit_status romkit_plant_step(const romkit_plant* plant, const double* x, const double* u, double* x_out) {
  return guarded([&] {
    need(plant, "plant");
    need(x, "x");
    need(u, "u");
    need(x_out, "x_out");
    copy_out(romkit::plant::step(plant->config, view(x, romkit::plant::kStateDim), view(u, romkit::plant::kInputDim)),
             x_out);
  });
}

void romkit_plant_free(romkit_plant* plant) { delete plant; }

romkit_status romkit_basis_load(const char* path, romkit_basis** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    if (!std::filesystem::exists(path))
      romkit::fail(romkit::ErrorCategory::missing_artifact, std::string("basis file not found: ") + path);
    *out = new romkit_basis{romkit::harness::deserialize_pod(romkit::io::read_file(path))};
  });
}

size_t romkit_basis_state_dim(const romkit_basis* basis) {
  return basis ? static_cast<size_t>(basis->model.basis.state_dim()) : 0;
}

size_t romkit_basis_order(const romkit_basis* basis) {
  return basis ? static_cast<size_t>(basis->model.basis.order()) : 0;
}

romkit_status romkit_basis_truncate(romkit_basis* basis, size_t order) {
  return guarded([&] {
    need(basis, "basis");
    romkit::require(order >= 1 && order <= static_cast<size_t>(basis->model.basis.order()),
                    "truncation order must lie in [1, current order]");
    basis->model.basis = romkit::pod::truncate(basis->model.basis, static_cast<int>(order));
  });
}

romkit_status romkit_basis_reduce(const romkit_basis* basis, const double* x, double* xi_out) {
  return guarded([&] {
    need(basis, "basis");
    need(x, "x");
    need(xi_out, "xi_out");
    const auto& m = basis->model;
    copy_out(romkit::pod::reduce(Eigen::VectorXd(view(x, m.basis.state_dim())), m.basis, m.normalization), xi_out);
  });
}

romkit_status romkit_basis_reconstruct(const romkit_basis* basis, const double* xi, double* x_out) {
  return guarded([&] {
    need(basis, "basis");
    need(xi, "xi");
    need(x_out, "x_out");
    const auto& m = basis->model;
    copy_out(romkit::pod::reconstruct(Eigen::VectorXd(view(xi, m.basis.order())), m.basis, m.normalization), x_out);
  });
}

void romkit_basis_free(romkit_basis* basis) { delete basis; }

romkit_status romkit_mlp_load(const char* path, romkit_mlp** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    if (!std::filesystem::exists(path))
      romkit::fail(romkit::ErrorCategory::missing_artifact, std::string("model file not found: ") + path);
    *out = new romkit_mlp{romkit::mlp::load(path)};
  });
}

size_t romkit_mlp_order(const romkit_mlp* model) {
  return model ? static_cast<size_t>(model->params.output_dim()) : 0;
}

romkit_status romkit_mlp_forward(const romkit_mlp* model, const double* xi, const double* u, double* xi_out) {
  return guarded([&] {
    need(model, "model");
    need(xi, "xi");
    need(u, "u");
    need(xi_out, "xi_out");
    const auto& p = model->params;
    copy_out(romkit::mlp::forward(p, view(xi, p.output_dim()), view(u, p.control_dim())), xi_out);
  });
}

romkit_status romkit_mlp_jacobian(const romkit_mlp* model, const double* xi, const double* u, double* jac_out) {
  return guarded([&] {
    need(model, "model");
    need(xi, "xi");
    need(u, "u");
    need(jac_out, "jac_out");
    const auto& p = model->params;
    const Eigen::MatrixXd j = romkit::mlp::jacobian_state(p, view(xi, p.output_dim()), view(u, p.control_dim()));
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(jac_out, j.rows(), j.cols()) = j;
  });
}

void romkit_mlp_free(romkit_mlp* model) { delete model; }

}  // extern "C"
