#include "survwalk/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include "survwalk/coxhead.hpp"
#include "survwalk/error.hpp"
#include "survwalk/vae.hpp"

namespace survwalk {

void EmbeddingTable::validate() const {
    if (rows.empty()) fail_invalid("embedding table is empty");
    const size_t d = rows[0].mu.size();
    std::vector<size_t> ids;
    ids.reserve(rows.size());
    for (const EmbeddingRow& r : rows) {
        if (r.mu.size() != d || r.sigma.size() != d) {
            fail_invalid("embedding table: inconsistent vector widths");
        }
        ids.push_back(r.id);
    }
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
        fail_invalid("embedding table: duplicate ids");
    }
}

void EmbeddingTable::write_csv(const std::string& path) const {
    validate();
    const size_t d = rows[0].mu.size();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail_io("cannot open for writing: " + path);
    out << "id";
    for (size_t k = 1; k <= d; ++k) out << ",mu_" << k;
    for (size_t k = 1; k <= d; ++k) out << ",sigma_" << k;
    out << ",risk,time,event,class\n";
    for (const EmbeddingRow& r : rows) {
        out << r.id;
        for (double v : r.mu) out << "," << format_double(v);
        for (double v : r.sigma) out << "," << format_double(v);
        out << "," << format_double(r.risk) << "," << format_double(r.time) << "," << r.event
            << "," << r.class_label << "\n";
    }
    if (!out) fail_io("write failed: " + path);
}

EmbeddingTable embed_dataset(const ModelState& model, const SurvivalDataset& data) {
    data.validate();
    if (data.feature_dim() != model.input_dim()) {
        fail_invalid("embed: dataset has " + std::to_string(data.feature_dim()) +
                     " features, model expects " + std::to_string(model.input_dim()));
    }
    const ModelView view = make_view(model);
    EmbeddingTable table;
    table.rows.reserve(data.size());
    for (size_t i = 0; i < data.size(); ++i) {
        const SurvivalRecord& rec = data.records[i];
        const LatentGaussian xi = view.encode_record(rec);
        EmbeddingRow row;
        row.id = i;
        row.mu = xi.mu;
        row.sigma = xi.sigma();
        row.risk = risk_score(xi.mu, view.psi);
        row.time = rec.time;
        row.event = rec.event;
        row.class_label = rec.class_label;
        table.rows.push_back(std::move(row));
    }
    return table;
}

double c_index(const std::vector<double>& risks, const std::vector<double>& times,
               const std::vector<int>& events) {
    const size_t n = risks.size();
    if (times.size() != n || events.size() != n) {
        fail_invalid("c_index: risks/times/events lengths disagree");
    }
    double concordant = 0.0;
    size_t comparable = 0;
    for (size_t i = 0; i < n; ++i) {
        if (events[i] == 0) continue;
        for (size_t j = 0; j < n; ++j) {
            if (i == j || !(times[i] < times[j])) continue;
            ++comparable;
            if (risks[i] > risks[j]) concordant += 1.0;
            else if (risks[i] == risks[j]) concordant += 0.5;
        }
    }
    if (comparable == 0) fail_invalid("c_index: no comparable pairs");
    return concordant / static_cast<double>(comparable);
}

namespace {

// average ranks, 1-based; ties share the mean of their positions
std::vector<double> ranks_of(const std::vector<double>& v) {
    const size_t n = v.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n);
    size_t at = 0;
    while (at < n) {
        size_t end = at;
        while (end + 1 < n && v[order[end + 1]] == v[order[at]]) ++end;
        const double shared = 0.5 * static_cast<double>(at + end) + 1.0;
        for (size_t k = at; k <= end; ++k) ranks[order[k]] = shared;
        at = end + 1;
    }
    return ranks;
}

}  // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) fail_invalid("spearman: lengths disagree");
    if (a.size() < 2) fail_invalid("spearman: need at least two points");
    const std::vector<double> ra = ranks_of(a);
    const std::vector<double> rb = ranks_of(b);
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double da = ra[i] - ma;
        const double db = rb[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa == 0.0 || sbb == 0.0) fail_invalid("spearman: zero rank variance");
    return sab / std::sqrt(saa * sbb);
}

double hazard_rank_agreement(const EmbeddingTable& table) {
    table.validate();
    std::map<int, std::pair<double, size_t>> per_class;  // class -> (risk sum, count)
    for (const EmbeddingRow& r : table.rows) {
        if (r.class_label < 0) fail_invalid("hazard_rank_agreement: class labels missing");
        auto& [sum, count] = per_class[r.class_label];
        sum += r.risk;
        count += 1;
    }
    if (per_class.size() < 2) fail_invalid("hazard_rank_agreement: single class");
    std::vector<double> classes, mean_risks;
    for (const auto& [label, sc] : per_class) {
        classes.push_back(static_cast<double>(label));
        mean_risks.push_back(sc.first / static_cast<double>(sc.second));
    }
    return spearman(classes, mean_risks);
}

void symmetric_eig(const Tensor<double>& matrix, std::vector<double>& eigenvalues,
                   Tensor<double>& eigenvectors) {
    if (matrix.rank() != 2 || matrix.rows() != matrix.cols()) {
        fail_invalid("symmetric_eig: matrix must be square");
    }
    const size_t d = matrix.rows();
    Tensor<double> a = matrix;
    Tensor<double> v = Tensor<double>::zeros({d, d});
    for (size_t i = 0; i < d; ++i) v.at(i, i) = 1.0;

    // cyclic Jacobi sweeps; d <= 16 here so convergence is a few sweeps
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (size_t p = 0; p < d; ++p)
            for (size_t q = p + 1; q < d; ++q) off += a.at(p, q) * a.at(p, q);
        if (off < 1e-28) break;
        for (size_t p = 0; p < d; ++p) {
            for (size_t q = p + 1; q < d; ++q) {
                const double apq = a.at(p, q);
                if (apq == 0.0) continue;
                const double theta = (a.at(q, q) - a.at(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (size_t k = 0; k < d; ++k) {
                    const double akp = a.at(k, p);
                    const double akq = a.at(k, q);
                    a.at(k, p) = c * akp - s * akq;
                    a.at(k, q) = s * akp + c * akq;
                }
                for (size_t k = 0; k < d; ++k) {
                    const double apk = a.at(p, k);
                    const double aqk = a.at(q, k);
                    a.at(p, k) = c * apk - s * aqk;
                    a.at(q, k) = s * apk + c * aqk;
                }
                for (size_t k = 0; k < d; ++k) {
                    const double vkp = v.at(k, p);
                    const double vkq = v.at(k, q);
                    v.at(k, p) = c * vkp - s * vkq;
                    v.at(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<size_t> order(d);
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t x, size_t y) { return a.at(x, x) > a.at(y, y); });
    eigenvalues.resize(d);
    eigenvectors = Tensor<double>::zeros({d, d});
    for (size_t j = 0; j < d; ++j) {
        eigenvalues[j] = a.at(order[j], order[j]);
        for (size_t i = 0; i < d; ++i) eigenvectors.at(i, j) = v.at(i, order[j]);
    }
}

Pca2 pca2(const Tensor<double>& points) {
    if (points.rank() != 2) fail_invalid("pca2: points must be a [n, d] matrix");
    const size_t n = points.rows();
    const size_t d = points.cols();
    if (n < 2) fail_invalid("pca2: need at least two points");
    if (d < 2) fail_invalid("pca2: need at least two dimensions");

    Pca2 out;
    out.mean.assign(d, 0.0);
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < d; ++j) out.mean[j] += points.at(i, j);
    for (double& m : out.mean) m /= static_cast<double>(n);

    Tensor<double> centered = points;
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < d; ++j) centered.at(i, j) -= out.mean[j];

    Tensor<double> cov = Tensor<double>::zeros({d, d});
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < d; ++j)
            for (size_t k = j; k < d; ++k) cov.at(j, k) += centered.at(i, j) * centered.at(i, k);
    for (size_t j = 0; j < d; ++j)
        for (size_t k = j; k < d; ++k) {
            cov.at(j, k) /= static_cast<double>(n - 1);
            cov.at(k, j) = cov.at(j, k);
        }
    double trace = 0.0;
    for (size_t j = 0; j < d; ++j) trace += cov.at(j, j);
    if (trace <= 0.0) fail_invalid("pca2: zero variance");

    Tensor<double> vectors;
    symmetric_eig(cov, out.eigenvalues, vectors);

    out.components = Tensor<double>::zeros({d, 2});
    for (size_t c = 0; c < 2; ++c) {
        size_t arg = 0;
        for (size_t i = 1; i < d; ++i) {
            if (std::abs(vectors.at(i, c)) > std::abs(vectors.at(arg, c))) arg = i;
        }
        const double sign = vectors.at(arg, c) < 0.0 ? -1.0 : 1.0;
        for (size_t i = 0; i < d; ++i) out.components.at(i, c) = sign * vectors.at(i, c);
    }

    out.projection = Tensor<double>::zeros({n, 2});
    for (size_t i = 0; i < n; ++i)
        for (size_t c = 0; c < 2; ++c) {
            double acc = 0.0;
            for (size_t j = 0; j < d; ++j) acc += centered.at(i, j) * out.components.at(j, c);
            out.projection.at(i, c) = acc;
        }
    return out;
}

EvalReport evaluate(const ModelState& model, const SurvivalDataset& data) {
    const EmbeddingTable table = embed_dataset(model, data);
    std::vector<double> risks, times;
    std::vector<int> events;
    risks.reserve(table.rows.size());
    for (const EmbeddingRow& r : table.rows) {
        risks.push_back(r.risk);
        times.push_back(r.time);
        events.push_back(r.event);
    }

    const ModelView view = make_view(model);
    double nll = 0.0;
    for (size_t i = 0; i < data.size(); ++i) {
        const std::vector<double> x(data.records[i].features.data.begin(),
                                    data.records[i].features.data.end());
        nll += bernoulli_nll(x, decode(table.rows[i].mu, view.decoder));
    }

    EvalReport report;
    report.c_index = c_index(risks, times, events);
    report.hazard_rank_agreement = hazard_rank_agreement(table);
    report.mean_reconstruction_nll = nll / static_cast<double>(data.size());
    return report;
}

}  // namespace survwalk
