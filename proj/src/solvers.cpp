#include "dsrc/solvers.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

namespace dsrc::solvers {

using matcore::DenseMatrix;
using matcore::SpdMatrix;
using matcore::gemm_blocked;

const char* method_name(Method m) {
    switch (m) {
        case Method::mne: return "mne";
        case Method::kf: return "kf";
        case Method::fis: return "fis";
        case Method::batch: return "batch";
    }
    return "?";
}

CheckpointStore::CheckpointStore(std::filesystem::path dir, matfile::Dtype dtype)
    : dir_(std::move(dir)), dtype_(dtype) {}

std::filesystem::path CheckpointStore::file_for(const char* kind, std::size_t step) const {
    char name[32];
    std::snprintf(name, sizeof(name), "%s_%04zu.dsmx", kind, step);
    return dir_ / name;
}

void CheckpointStore::begin(std::size_t n_steps, std::size_t dim) {
    std::filesystem::create_directories(dir_);
    n_steps_ = n_steps;
    dim_ = dim;
    checksums_.clear();
}

void CheckpointStore::put(const char* kind, std::size_t step, const DenseMatrix& m) {
    const auto path = file_for(kind, step);
    matfile::write(path, m, dtype_);
    checksums_.emplace_back(path.filename().string(), matfile::crc32_file(path));
}

void CheckpointStore::finish() {
    nlohmann::json manifest;
    manifest["n_steps"] = n_steps_;
    manifest["dim"] = dim_;
    manifest["dtype"] = dtype_ == matfile::Dtype::binary32 ? "binary32" : "binary64";
    nlohmann::json files = nlohmann::json::object();
    for (auto& [name, crc] : checksums_) files[name] = crc;
    manifest["files"] = std::move(files);
    std::ofstream out(dir_ / "manifest.json", std::ios::trunc);
    out << manifest.dump(1) << "\n";
    if (!out) throw ContractError("CheckpointStore: cannot write manifest in " + dir_.string());
}

void CheckpointStore::open_for_read(std::size_t expected_dim) {
    const auto mpath = dir_ / "manifest.json";
    std::ifstream in(mpath);
    if (!in) throw CorruptError("CheckpointStore: missing manifest " + mpath.string(), 0);
    nlohmann::json manifest;
    try {
        in >> manifest;
        n_steps_ = manifest.at("n_steps").get<std::size_t>();
        dim_ = manifest.at("dim").get<std::size_t>();
        dtype_ = manifest.at("dtype").get<std::string>() == "binary64" ? matfile::Dtype::binary64
                                                                       : matfile::Dtype::binary32;
        checksums_.clear();
        for (auto& [name, crc] : manifest.at("files").items())
            checksums_.emplace_back(name, crc.get<std::uint32_t>());
    } catch (const nlohmann::json::exception& e) {
        throw CorruptError("CheckpointStore: malformed manifest: " + std::string(e.what()), 0);
    }
    if (dim_ != expected_dim)
        throw CorruptError("CheckpointStore: dim " + std::to_string(dim_) +
                               " does not match model dim " + std::to_string(expected_dim), 0);
    if (checksums_.size() != 2 * n_steps_)
        throw CorruptError("CheckpointStore: expected " + std::to_string(2 * n_steps_) +
                               " files in manifest, found " + std::to_string(checksums_.size()), 0);
    for (auto& [name, crc] : checksums_) {
        const auto path = dir_ / name;
        if (!std::filesystem::exists(path))
            throw CorruptError("CheckpointStore: missing file " + path.string(), 0);
        if (matfile::crc32_file(path) != crc)
            throw CorruptError("CheckpointStore: checksum mismatch in " + path.string(), 0);
    }
}

DenseMatrix CheckpointStore::get(const char* kind, std::size_t step) const {
    DenseMatrix m = matfile::read(file_for(kind, step));
    if (m.rows() != dim_ || m.cols() != dim_)
        throw CorruptError("CheckpointStore: bad dimensions in " +
                               file_for(kind, step).string(), matfile::kHeaderBytes);
    return m;
}

EstimateSeries mne_solve(const DenseMatrix& H, const SpdMatrix& R,
                         const SpdMatrix& obs_noise, double lambda,
                         const statespace::RecordingBlock& Y) {
    if (!(lambda > 0.0)) throw ContractError("mne_solve: lambda must be positive");
    const std::size_t S = H.rows();
    const std::size_t P = H.cols();
    if (R.dim() != P || obs_noise.dim() != S || Y.channels() != S)
        throw ContractError("mne_solve: dimension mismatch");

    // lambda H R H^T + Sigma_eps, factored once and reused for all frames.
    DenseMatrix hr = gemm_blocked(H, R.matrix());
    DenseMatrix m = matcore::add(matcore::scale(gemm_blocked(hr, H, false, true), lambda),
                                 obs_noise.matrix());
    SpdMatrix bracket = matcore::symmetrize(m);
    DenseMatrix x = matcore::solve_spd(bracket, Y.data);          // S x N
    DenseMatrix j = matcore::scale(gemm_blocked(hr, x, true, false), lambda);  // P x N

    EstimateSeries out;
    out.estimates = std::move(j);
    out.method = Method::mne;
    return out;
}

namespace {

DenseMatrix column(const std::vector<double>& v) {
    return DenseMatrix(v.size(), 1, std::vector<double>(v));
}

}  // namespace

EstimateSeries kalman_filter(const statespace::StateModel& model,
                             const statespace::RecordingBlock& Y, CheckpointStore& store) {
    model.check_consistent();
    const std::size_t P = model.sources();
    const std::size_t S = model.channels();
    const std::size_t N = Y.steps();
    if (Y.channels() != S) throw ContractError("kalman_filter: recording channel mismatch");

    store.begin(N, P);

    EstimateSeries out;
    out.method = Method::kf;
    out.estimates = DenseMatrix(P, N);
    out.innovation_norms.reserve(N);
    out.cov_traces.reserve(N);

    DenseMatrix j = column(model.init_mean);  // J_{k|k}
    SpdMatrix w = model.init_cov;             // W_{k|k}

    for (std::size_t k = 0; k < N; ++k) {
        try {
            // Prediction.
            DenseMatrix j_pred =
                model.f_is_scalar ? matcore::scale(j, model.f_scale) : gemm_blocked(model.F, j);
            DenseMatrix w_pred_raw =
                model.f_is_scalar
                    ? matcore::add(matcore::scale(w.matrix(), model.f_scale * model.f_scale),
                                   model.state_noise.matrix())
                    : matcore::add(gemm_blocked(gemm_blocked(model.F, w.matrix()), model.F,
                                                false, true),
                                   model.state_noise.matrix());
            SpdMatrix w_pred = matcore::symmetrize(w_pred_raw);
            store.put("pred", k, w_pred.matrix());

            // Gain via the S x S innovation covariance.
            DenseMatrix hw = gemm_blocked(model.H, w_pred.matrix());  // S x P
            SpdMatrix innov_cov = matcore::symmetrize(
                matcore::add(gemm_blocked(hw, model.H, false, true), model.obs_noise.matrix()));
            DenseMatrix kt = matcore::solve_spd(innov_cov, hw);  // S x P, = K^T

            // Update.
            DenseMatrix yk(S, 1);
            for (std::size_t s = 0; s < S; ++s) yk.at(s, 0) = Y.data.at(s, k);
            DenseMatrix innov = matcore::subtract(yk, gemm_blocked(model.H, j_pred));
            DenseMatrix j_upd = matcore::add(j_pred, gemm_blocked(kt, innov, true, false));
            SpdMatrix w_upd = matcore::symmetrize(
                matcore::subtract(w_pred.matrix(), gemm_blocked(kt, hw, true, false)));
            store.put("upd", k, w_upd.matrix());

            for (std::size_t p = 0; p < P; ++p) out.estimates.at(p, k) = j_upd.at(p, 0);
            out.innovation_norms.push_back(innov.frobenius_norm());
            out.cov_traces.push_back(w_upd.trace());

            j = std::move(j_upd);
            w = std::move(w_upd);
        } catch (const NotSpdError& e) {
            throw SolverError("kalman_filter: covariance lost positive-definiteness at step " +
                                  std::to_string(k) + " (" + e.what() + ")", k);
        }
    }
    store.finish();
    return out;
}

EstimateSeries fis_smooth(const statespace::StateModel& model,
                          const EstimateSeries& filter_out, CheckpointStore& store) {
    model.check_consistent();
    const std::size_t P = model.sources();
    const std::size_t N = filter_out.steps();
    if (filter_out.sources() != P) throw ContractError("fis_smooth: filter dimension mismatch");
    store.open_for_read(P);
    if (store.n_steps() != N)
        throw CorruptError("fis_smooth: store has " + std::to_string(store.n_steps()) +
                               " steps, filter has " + std::to_string(N), 0);
    if (N == 0) throw ContractError("fis_smooth: empty filter pass");

    EstimateSeries out;
    out.method = Method::fis;
    out.estimates = DenseMatrix(P, N);
    out.cov_traces.assign(N, 0.0);

    auto filter_col = [&](std::size_t k) {
        DenseMatrix c(P, 1);
        for (std::size_t p = 0; p < P; ++p) c.at(p, 0) = filter_out.estimates.at(p, k);
        return c;
    };

    // Seed at k = N with the filter's final frame.
    DenseMatrix j_next = filter_col(N - 1);
    DenseMatrix w_next = store.get("upd", N - 1);
    for (std::size_t p = 0; p < P; ++p) out.estimates.at(p, N - 1) = j_next.at(p, 0);
    out.cov_traces[N - 1] = w_next.trace();

    for (std::size_t k = N - 1; k-- > 0;) {
        try {
            DenseMatrix w_upd = store.get("upd", k);
            SpdMatrix w_pred_next = matcore::symmetrize(store.get("pred", k + 1));

            // A_k = W_{k|k} F^T W_{k+1|k}^-1, right-applied via transposed solve.
            DenseMatrix wft = model.f_is_scalar
                                  ? matcore::scale(w_upd, model.f_scale)
                                  : gemm_blocked(w_upd, model.F, false, true);
            DenseMatrix a = matcore::solve_spd_right(w_pred_next, wft);

            DenseMatrix j_filt = filter_col(k);
            DenseMatrix j_pred_next =
                model.f_is_scalar ? matcore::scale(j_filt, model.f_scale)
                                  : gemm_blocked(model.F, j_filt);
            DenseMatrix j_smooth = matcore::add(
                j_filt, gemm_blocked(a, matcore::subtract(j_next, j_pred_next)));

            DenseMatrix dw = matcore::subtract(w_next, w_pred_next.matrix());
            DenseMatrix w_smooth =
                matcore::add(w_upd, gemm_blocked(gemm_blocked(a, dw), a, false, true));

            for (std::size_t p = 0; p < P; ++p) out.estimates.at(p, k) = j_smooth.at(p, 0);
            out.cov_traces[k] = w_smooth.trace();

            j_next = std::move(j_smooth);
            w_next = std::move(w_smooth);
        } catch (const NotSpdError& e) {
            throw SolverError("fis_smooth: predicted covariance not SPD at step " +
                                  std::to_string(k + 1) + " (" + e.what() + ")", k + 1);
        }
    }
    return out;
}

EstimateSeries batch_map_oracle(const statespace::StateModel& model,
                                const statespace::RecordingBlock& Y) {
    model.check_consistent();
    const std::size_t P = model.sources();
    const std::size_t S = model.channels();
    const std::size_t N = Y.steps();
    if (Y.channels() != S) throw ContractError("batch_map_oracle: channel mismatch");
    if (P * N > 5000)
        throw ContractError("batch_map_oracle: P*N = " + std::to_string(P * N) +
                            " exceeds the dense-solve guard of 5000");

    const DenseMatrix eye = DenseMatrix::identity(P);
    DenseMatrix q_inv = matcore::solve_spd(model.state_noise, eye);       // Sigma_w^-1
    DenseMatrix w0_inv = matcore::solve_spd(model.init_cov, eye);         // W_0^-1
    DenseMatrix einv_h = matcore::solve_spd(model.obs_noise, model.H);    // Sigma_eps^-1 H
    DenseMatrix ht_einv_h = gemm_blocked(model.H, einv_h, true, false);   // P x P
    DenseMatrix einv_y = matcore::solve_spd(model.obs_noise, Y.data);     // S x N
    DenseMatrix ht_einv_y = gemm_blocked(model.H, einv_y, true, false);   // P x N

    DenseMatrix ftq = model.f_is_scalar ? matcore::scale(q_inv, model.f_scale)
                                        : gemm_blocked(model.F, q_inv, true, false);
    DenseMatrix ftqf = model.f_is_scalar
                           ? matcore::scale(q_inv, model.f_scale * model.f_scale)
                           : gemm_blocked(ftq, model.F);
    DenseMatrix qf = model.f_is_scalar ? matcore::scale(q_inv, model.f_scale)
                                       : gemm_blocked(q_inv, model.F);

    // Joint precision over stacked states (J_0, J_1, ..., J_N); block
    // tridiagonal from the Markov chain plus per-step likelihood terms.
    const std::size_t dim = (N + 1) * P;
    DenseMatrix lambda(dim, dim);
    DenseMatrix rhs(dim, 1);
    auto add_block = [&](std::size_t br, std::size_t bc, const DenseMatrix& blk, double sign) {
        for (std::size_t r = 0; r < P; ++r)
            for (std::size_t c = 0; c < P; ++c)
                lambda.at(br * P + r, bc * P + c) += sign * blk.at(r, c);
    };
    for (std::size_t t = 0; t <= N; ++t) {
        if (t == 0) {
            add_block(0, 0, w0_inv, 1.0);
        } else {
            add_block(t, t, q_inv, 1.0);
            add_block(t, t, ht_einv_h, 1.0);
            add_block(t - 1, t - 1, ftqf, 1.0);
            add_block(t - 1, t, ftq, -1.0);
            add_block(t, t - 1, qf, -1.0);
            for (std::size_t p = 0; p < P; ++p)
                rhs.at(t * P + p, 0) = ht_einv_y.at(p, t - 1);
        }
    }
    for (std::size_t p = 0; p < P; ++p) {
        double acc = 0.0;
        for (std::size_t c = 0; c < P; ++c) acc += w0_inv.at(p, c) * model.init_mean[c];
        rhs.at(p, 0) += acc;
    }

    SpdMatrix prec = matcore::symmetrize(lambda);
    DenseMatrix x = matcore::solve_spd(prec, rhs);

    EstimateSeries out;
    out.method = Method::batch;
    out.estimates = DenseMatrix(P, N);
    for (std::size_t t = 1; t <= N; ++t)
        for (std::size_t p = 0; p < P; ++p)
            out.estimates.at(p, t - 1) = x.at(t * P + p, 0);
    return out;
}

}  // namespace dsrc::solvers
