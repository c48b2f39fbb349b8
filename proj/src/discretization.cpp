#include "jdf/discretization.hpp"

#include "jdf/autodiff.hpp"
#include "jdf/error.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace jdf {

Family Family::fourier(Domain domain, DType dtype, std::size_t components) {
    return Family(FourierSeries{dtype}, std::move(domain), components);
}

Family Family::finite_differences(Domain domain, int accuracy, DType dtype, std::size_t components) {
    if (accuracy < 2 || accuracy % 2 != 0)
        fail(ErrorCode::InvalidArgument, "finite-difference accuracy must be even and >= 2");
    return Family(FiniteDifferences{accuracy, dtype}, std::move(domain), components);
}

Family Family::polynomial(std::size_t degree) { return Family(Polynomial{degree}, std::nullopt, 1); }

Family Family::arbitrary(Domain domain, Shape theta_shape, std::size_t components, InterpolationFn fn,
                         std::string label) {
    if (!fn) fail(ErrorCode::InvalidArgument, "arbitrary family needs an interpolation function");
    return Family(Arbitrary{std::make_shared<const InterpolationFn>(std::move(fn)), std::move(theta_shape),
                            std::move(label)},
                  std::move(domain), components);
}

const Domain& Family::grid() const {
    if (!domain_) fail(ErrorCode::NoGrid, describe() + " has no collocation grid");
    return *domain_;
}

DType Family::dtype() const {
    return std::visit(
        [](const auto& k) -> DType {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, FourierSeries> || std::is_same_v<K, FiniteDifferences>) return k.dtype;
            else return DType::Real64;
        },
        kind_);
}

Shape Family::param_shape() const {
    if (auto* p = std::get_if<Polynomial>(&kind_)) return {p->degree + 1};
    if (auto* a = std::get_if<Arbitrary>(&kind_)) return a->theta_shape;
    return domain_->grid_shape(components_);
}

Family Family::with_components(std::size_t components) const {
    Family f = *this;
    f.components_ = components;
    return f;
}

Family Family::with_dtype(DType dtype) const {
    Family f = *this;
    if (auto* k = std::get_if<FourierSeries>(&f.kind_)) k->dtype = dtype;
    if (auto* k = std::get_if<FiniteDifferences>(&f.kind_)) k->dtype = dtype;
    return f;
}

Family Family::with_kind(FamilyKind kind) const {
    Family f = *this;
    f.kind_ = std::move(kind);
    return f;
}

bool Family::compatible_with(const Family& other) const {
    if (kind_.index() != other.kind_.index() || domain_ != other.domain_) return false;
    if (auto* a = std::get_if<FiniteDifferences>(&kind_))
        return a->accuracy == std::get<FiniteDifferences>(other.kind_).accuracy;
    if (auto* a = std::get_if<Polynomial>(&kind_)) return a->degree == std::get<Polynomial>(other.kind_).degree;
    if (auto* a = std::get_if<Arbitrary>(&kind_)) return *a == std::get<Arbitrary>(other.kind_);
    return true;
}

std::string Family::describe() const {
    std::ostringstream os;
    std::visit(
        [&](const auto& k) {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, FourierSeries>) os << "FourierSeries(" << to_string(k.dtype) << ")";
            else if constexpr (std::is_same_v<K, FiniteDifferences>)
                os << "FiniteDifferences(accuracy=" << k.accuracy << ", " << to_string(k.dtype) << ")";
            else if constexpr (std::is_same_v<K, Polynomial>) os << "Polynomial(" << k.degree << ")";
            else os << "Arbitrary(" << k.label << ")";
        },
        kind_);
    if (domain_) os << " on " << to_string(Shape(domain_->n().begin(), domain_->n().end()));
    os << ", M=" << components_;
    return os.str();
}

Field::Field(Family family_, Tensor params_, std::string name_)
    : family(std::move(family_)), params(std::move(params_)), name(std::move(name_)) {
    if (params.shape() != family.param_shape() || params.dtype() != family.dtype())
        fail(ErrorCode::ShapeMismatch, "field '" + name + "' params " + to_string(params.shape()) + "/" +
                                           to_string(params.dtype()) + " do not match " + family.describe());
}

Field empty_field(const Family& family, const std::string& name) {
    return Field(family, Tensor::zeros(family.param_shape(), family.dtype()), name);
}

namespace {

void check_points(const Tensor& points, std::size_t dims) {
    if (points.rank() != 2 || points.shape()[1] != dims || points.is_complex())
        fail(ErrorCode::PointDimensionMismatch,
             "points " + to_string(points.shape()) + " for a " + std::to_string(dims) + "-D family");
}

// Periodic trigonometric interpolation weights of one axis at offset x.
std::vector<double> trig_weights(const Domain& d, std::size_t axis, double x) {
    const std::size_t n = d.n()[axis];
    const double L = d.length(axis);
    const std::size_t half = n / 2;
    std::vector<double> w(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double xj = (static_cast<double>(j) - static_cast<double>(half)) * d.dx()[axis];
        const double phase = 2.0 * std::numbers::pi * (x - xj) / L;
        double acc = 1.0;
        for (std::size_t f = 1; f < (n + 1) / 2; ++f) acc += 2.0 * std::cos(static_cast<double>(f) * phase);
        if (n % 2 == 0) acc += std::cos(static_cast<double>(half) * phase);
        w[j] = acc / static_cast<double>(n);
    }
    return w;
}

// Multilinear weights of one axis: (index, weight) pairs, clamped to the grid.
std::vector<std::pair<std::size_t, double>> linear_weights(const Domain& d, std::size_t axis, double x) {
    const std::size_t n = d.n()[axis];
    double s = x / d.dx()[axis] + static_cast<double>(n / 2);
    s = std::clamp(s, 0.0, static_cast<double>(n - 1));
    std::size_t i0 = std::min(static_cast<std::size_t>(std::floor(s)), n - 2);
    const double t = s - static_cast<double>(i0);
    return {{i0, 1.0 - t}, {i0 + 1, t}};
}

// Contracts grid parameters (n + [M]) against per-axis sparse weight lists.
template <class T>
void contract(std::span<const T> theta, const Domain& d, std::size_t M,
              const std::vector<std::vector<std::pair<std::size_t, double>>>& weights, std::span<T> out) {
    const std::size_t dims = d.dims();
    std::vector<std::size_t> pos(dims, 0);
    while (true) {
        double w = 1.0;
        std::size_t flat = 0;
        for (std::size_t a = 0; a < dims; ++a) {
            const auto& [idx, wa] = weights[a][pos[a]];
            w *= wa;
            flat = flat * d.n()[a] + idx;
        }
        if (w != 0.0)
            for (std::size_t m = 0; m < M; ++m) out[m] += w * theta[flat * M + m];
        std::size_t a = dims;
        while (a-- > 0) {
            if (++pos[a] < weights[a].size()) break;
            pos[a] = 0;
        }
        if (a == static_cast<std::size_t>(-1)) break;
    }
}

Tensor interpolate_grid(const Field& field, const Tensor& points, bool trig) {
    const Domain& d = field.family.grid();
    const std::size_t M = field.family.components();
    const std::size_t P = points.shape()[0];
    Tensor out({P, M}, field.params.dtype());
    for (std::size_t p = 0; p < P; ++p) {
        std::vector<std::vector<std::pair<std::size_t, double>>> weights(d.dims());
        for (std::size_t a = 0; a < d.dims(); ++a) {
            const double x = points.real_at(p * d.dims() + a);
            if (trig) {
                auto w = trig_weights(d, a, x);
                for (std::size_t j = 0; j < w.size(); ++j) weights[a].emplace_back(j, w[j]);
            } else {
                weights[a] = linear_weights(d, a, x);
            }
        }
        if (out.is_complex())
            contract<cplx>(field.params.complex_data(), d, M, weights, out.complex_data().subspan(p * M, M));
        else
            contract<double>(field.params.real_data(), d, M, weights, out.real_data().subspan(p * M, M));
    }
    return out;
}

Tensor interpolate_arbitrary(const Field& field, const Tensor& points) {
    const auto& arb = field.family.as<Arbitrary>();
    GraphBuilder b;
    Var theta = b.input("theta", arb.theta_shape);
    Var x = b.input("x", points.shape());
    Var y = (*arb.fn)(theta, x);
    const Shape want{points.shape()[0], field.family.components()};
    if (y.shape() != want)
        fail(ErrorCode::ShapeMismatch, "interpolation function returned " + to_string(y.shape()) + ", expected " +
                                           to_string(want));
    return evaluate(b.build(y), {{"theta", field.params}, {"x", points}});
}

} // namespace

Tensor interpolate(const Field& field, const Tensor& points) {
    const Family& fam = field.family;
    if (const auto* poly = std::get_if<Polynomial>(&fam.kind())) {
        check_points(points, 1);
        const std::size_t P = points.shape()[0];
        Tensor out({P, 1}, DType::Real64);
        auto theta = field.params.real_data();
        for (std::size_t p = 0; p < P; ++p) {
            const double x = points.real_at(p);
            double acc = 0.0;
            for (std::size_t i = poly->degree + 1; i-- > 0;) acc = acc * x + theta[i];
            out.real_data()[p] = acc;
        }
        return out;
    }
    check_points(points, fam.grid().dims());
    if (fam.is<FourierSeries>()) return interpolate_grid(field, points, true);
    if (fam.is<FiniteDifferences>()) return interpolate_grid(field, points, false);
    return interpolate_arbitrary(field, points);
}

Tensor sample_on_grid(const Field& field) {
    const Family& fam = field.family;
    if (fam.is<Polynomial>()) fail(ErrorCode::NoGrid, "polynomial family has no collocation grid");
    if (!fam.is<Arbitrary>()) return field.params;
    const Domain& d = fam.grid();
    Tensor coords = grid_coordinates(d).reshaped({d.num_points(), d.dims()});
    return interpolate_arbitrary(field, coords).reshaped(d.grid_shape(fam.components()));
}

} // namespace jdf
