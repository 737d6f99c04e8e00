#include "deqmpi/storage.hpp"

#include <cmath>

namespace deqmpi {

namespace {

std::vector<std::uint32_t> dims1(std::size_t n) { return {static_cast<std::uint32_t>(n)}; }

std::string kind_code_to_name(double code) {
    switch (static_cast<int>(code)) {
    case 0: return "deq";
    case 1: return "deq-noLc";
    case 2: return "unrolled";
    case 3: return "e2e";
    case 4: return "rdn";
    case 5: return "lc";
    }
    throw io_error("model: unknown kind code");
}

double kind_name_to_code(const std::string& kind) {
    if (kind == "deq") return 0;
    if (kind == "deq-noLc") return 1;
    if (kind == "unrolled") return 2;
    if (kind == "e2e") return 3;
    if (kind == "rdn") return 4;
    if (kind == "lc") return 5;
    throw io_error("model: unknown kind '" + kind + "'");
}

} // namespace

void save_sm(const SystemMatrix& sm, const std::string& path) {
    TensorContainer c;
    c.add("sm.stacked",
          {static_cast<std::uint32_t>(sm.stacked.rows), static_cast<std::uint32_t>(sm.stacked.cols)},
          sm.stacked.data);
    c.add("sm.meta", dims1(5),
          {static_cast<double>(sm.grid_h), static_cast<double>(sm.grid_w),
           static_cast<double>(sm.n_angles), static_cast<double>(sm.freq_bins),
           static_cast<double>(sm.complex_rows)});
    Vector harm(sm.complex_rows), off(sm.complex_rows), ang(sm.complex_rows), fidx(sm.complex_rows);
    for (std::size_t i = 0; i < sm.complex_rows; ++i) {
        harm[i] = sm.row_labels[i].harmonic;
        off[i] = sm.row_labels[i].bin_offset;
        ang[i] = sm.row_labels[i].angle;
        fidx[i] = sm.freq_index[i];
    }
    c.add("sm.row_harmonic", dims1(sm.complex_rows), harm);
    c.add("sm.row_offset", dims1(sm.complex_rows), off);
    c.add("sm.row_angle", dims1(sm.complex_rows), ang);
    c.add("sm.freq_index", dims1(sm.complex_rows), fidx);
    c.add("sm.row_snr", dims1(sm.complex_rows), sm.row_snr);
    c.write(path);
}

SystemMatrix load_sm(const std::string& path) {
    const TensorContainer c = TensorContainer::read(path);
    SystemMatrix sm;
    const TensorEntry& meta = c.get("sm.meta");
    if (meta.f64.size() != 5) throw io_error("sm container: bad meta entry");
    sm.grid_h = static_cast<std::size_t>(meta.f64[0]);
    sm.grid_w = static_cast<std::size_t>(meta.f64[1]);
    sm.n_angles = static_cast<std::size_t>(meta.f64[2]);
    sm.freq_bins = static_cast<std::size_t>(meta.f64[3]);
    sm.complex_rows = static_cast<std::size_t>(meta.f64[4]);

    const TensorEntry& st = c.get("sm.stacked");
    if (st.dims.size() != 2 || st.dims[0] != 2 * sm.complex_rows ||
        st.dims[1] != sm.grid_h * sm.grid_w)
        throw io_error("sm container: stacked matrix shape mismatch");
    sm.stacked = DenseMatrix(st.dims[0], st.dims[1]);
    sm.stacked.data = st.f64;

    const Vector& harm = c.get("sm.row_harmonic").f64;
    const Vector& off = c.get("sm.row_offset").f64;
    const Vector& ang = c.get("sm.row_angle").f64;
    const Vector& fidx = c.get("sm.freq_index").f64;
    sm.row_snr = c.get("sm.row_snr").f64;
    if (harm.size() != sm.complex_rows || sm.row_snr.size() != sm.complex_rows)
        throw io_error("sm container: row metadata length mismatch");
    sm.row_labels.resize(sm.complex_rows);
    sm.freq_index.resize(sm.complex_rows);
    for (std::size_t i = 0; i < sm.complex_rows; ++i) {
        sm.row_labels[i] = {static_cast<int>(harm[i]), static_cast<int>(off[i]),
                            static_cast<std::uint32_t>(ang[i])};
        sm.freq_index[i] = static_cast<std::uint32_t>(fidx[i]);
    }
    return sm;
}

void save_images(const std::vector<ImageGrid>& imgs, const std::string& path) {
    if (imgs.empty()) throw io_error("save_images: empty set");
    const std::size_t h = imgs[0].h, w = imgs[0].w;
    Vector all;
    all.reserve(imgs.size() * h * w);
    for (const ImageGrid& img : imgs) {
        if (img.h != h || img.w != w) throw shape_error("save_images: mixed grid sizes");
        all.insert(all.end(), img.values.begin(), img.values.end());
    }
    TensorContainer c;
    c.add("images",
          {static_cast<std::uint32_t>(imgs.size()), static_cast<std::uint32_t>(h),
           static_cast<std::uint32_t>(w)},
          std::move(all));
    c.write(path);
}

std::vector<ImageGrid> load_images(const std::string& path) {
    const TensorContainer c = TensorContainer::read(path);
    const TensorEntry& e = c.get("images");
    if (e.dims.size() != 3) throw io_error("images container: expected a 3-D entry");
    const std::size_t n = e.dims[0], h = e.dims[1], w = e.dims[2];
    std::vector<ImageGrid> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        ImageGrid img(h, w);
        std::copy(e.f64.begin() + i * h * w, e.f64.begin() + (i + 1) * h * w,
                  img.values.begin());
        out.push_back(std::move(img));
    }
    return out;
}

void save_measurements(const MeasurementSet& ms, const std::string& path) {
    if (ms.items.empty()) throw io_error("save_measurements: empty set");
    const std::size_t n = ms.items.size(), m2 = ms.stacked_rows;
    Vector y(n * m2), snr(n), nstd(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (ms.items[i].data.size() != m2)
            throw shape_error("save_measurements: inconsistent lengths");
        std::copy(ms.items[i].data.begin(), ms.items[i].data.end(), y.begin() + i * m2);
        snr[i] = ms.items[i].snr_db ? *ms.items[i].snr_db
                                    : std::numeric_limits<double>::infinity();
        nstd[i] = ms.items[i].noise_std ? *ms.items[i].noise_std : 0.0;
    }
    TensorContainer c;
    c.add("y", {static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(m2)}, std::move(y));
    c.add("snr_db", dims1(n), std::move(snr));
    c.add("noise_std", dims1(n), std::move(nstd));
    if (!ms.clean.empty()) {
        Vector cl(n * m2);
        for (std::size_t i = 0; i < n; ++i)
            std::copy(ms.clean[i].begin(), ms.clean[i].end(), cl.begin() + i * m2);
        c.add("clean", {static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(m2)},
              std::move(cl));
    }
    c.write(path);
}

MeasurementSet load_measurements(const std::string& path) {
    const TensorContainer c = TensorContainer::read(path);
    const TensorEntry& y = c.get("y");
    if (y.dims.size() != 2) throw io_error("measurement container: expected 2-D y");
    MeasurementSet ms;
    const std::size_t n = y.dims[0];
    ms.stacked_rows = y.dims[1];
    const Vector& snr = c.get("snr_db").f64;
    const Vector& nstd = c.get("noise_std").f64;
    ms.items.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        Measurement& m = ms.items[i];
        m.data.assign(y.f64.begin() + i * ms.stacked_rows, y.f64.begin() + (i + 1) * ms.stacked_rows);
        if (std::isfinite(snr[i])) m.snr_db = snr[i];
        if (nstd[i] > 0.0) m.noise_std = nstd[i];
    }
    if (c.has("clean")) {
        const TensorEntry& cl = c.get("clean");
        ms.clean.resize(n);
        for (std::size_t i = 0; i < n; ++i)
            ms.clean[i].assign(cl.f64.begin() + i * ms.stacked_rows,
                               cl.f64.begin() + (i + 1) * ms.stacked_rows);
    }
    return ms;
}

void save_model(const ModelFile& m, const std::string& path) {
    TensorContainer c;
    c.add_scalar("meta.kind", kind_name_to_code(m.kind));
    c.add_scalar("meta.snr_db", m.snr_db);
    if (!m.log_train_loss.empty())
        c.add("log.train_loss", dims1(m.log_train_loss.size()), m.log_train_loss);
    if (!m.log_val_psnr.empty())
        c.add("log.val_psnr", dims1(m.log_val_psnr.size()), m.log_val_psnr);
    m.params.save(c, "p.");
    c.write(path);
}

ModelFile load_model(const std::string& path) {
    const TensorContainer c = TensorContainer::read(path);
    ModelFile m;
    m.kind = kind_code_to_name(c.scalar("meta.kind"));
    m.snr_db = c.scalar("meta.snr_db");
    if (c.has("log.train_loss")) m.log_train_loss = c.get("log.train_loss").f64;
    if (c.has("log.val_psnr")) m.log_val_psnr = c.get("log.val_psnr").f64;
    m.params = ParamStore::load(c, "p.");
    return m;
}

} // namespace deqmpi
