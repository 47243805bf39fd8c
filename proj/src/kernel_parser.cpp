#include <cctype>
#include <cstdlib>
#include <map>
#include <optional>
#include <sstream>
#include <variant>

#include "gplccm/errors.hpp"
#include "gplccm/kernels.hpp"

namespace gplccm {

namespace {

// Hand-rolled recursive descent over the expression grammar
//   expr   := term ('+' term)*
//   term   := factor ('*' factor)*
//   factor := name '(' args? ')' | '(' expr ')'
//   arg    := (name '=')? (number | '[' number (',' number)* ']')
struct Parser {
  std::string_view text;
  std::size_t pos = 0;

  [[noreturn]] void fail(const std::string& what) const {
    std::ostringstream os;
    os << "kernel expression error at position " << pos << ": " << what
       << " in \"" << text << "\"";
    throw ConfigError(os.str());
  }

  void skip_space() {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  }

  bool eat(char c) {
    skip_space();
    if (pos < text.size() && text[pos] == c) {
      ++pos;
      return true;
    }
    return false;
  }

  std::string name() {
    skip_space();
    std::size_t start = pos;
    while (pos < text.size() &&
           (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_')) {
      ++pos;
    }
    if (pos == start) fail("expected a name");
    return std::string(text.substr(start, pos - start));
  }

  double number() {
    skip_space();
    const char* begin = text.data() + pos;
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end == begin) fail("expected a number");
    pos += static_cast<std::size_t>(end - begin);
    return v;
  }

  using ArgValue = std::variant<double, Eigen::VectorXd>;

  ArgValue value() {
    if (eat('[')) {
      std::vector<double> xs;
      xs.push_back(number());
      while (eat(',')) xs.push_back(number());
      if (!eat(']')) fail("expected ']'");
      return Eigen::Map<Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size())).eval();
    }
    return number();
  }

  static Eigen::VectorXd as_vector(const ArgValue& v) {
    if (std::holds_alternative<double>(v)) {
      return Eigen::VectorXd::Constant(1, std::get<double>(v));
    }
    return std::get<Eigen::VectorXd>(v);
  }

  double as_scalar(const ArgValue& v, const char* what) {
    if (!std::holds_alternative<double>(v)) fail(std::string(what) + " must be a scalar");
    return std::get<double>(v);
  }

  KernelSpec call(const std::string& fn) {
    if (!eat('(')) fail("expected '(' after '" + fn + "'");
    std::vector<ArgValue> positional;
    std::map<std::string, ArgValue> named;
    skip_space();
    if (!eat(')')) {
      while (true) {
        skip_space();
        std::size_t mark = pos;
        bool is_named = false;
        if (pos < text.size() && std::isalpha(static_cast<unsigned char>(text[pos]))) {
          std::string key = name();
          if (eat('=')) {
            if (named.count(key)) fail("duplicate argument '" + key + "'");
            named[key] = value();
            is_named = true;
          } else {
            pos = mark;
          }
        }
        if (!is_named) {
          if (!named.empty()) fail("positional argument after named argument");
          positional.push_back(value());
        }
        if (eat(')')) break;
        if (!eat(',')) fail("expected ',' or ')'");
      }
    }

    auto take = [&](const char* key, std::size_t slot) -> std::optional<ArgValue> {
      auto it = named.find(key);
      if (it != named.end()) {
        ArgValue v = it->second;
        named.erase(it);
        return v;
      }
      if (slot < positional.size()) return positional[slot];
      return std::nullopt;
    };
    auto finish = [&](std::size_t n_slots, const char* fn_name) {
      if (!named.empty()) fail("unknown argument '" + named.begin()->first + "' for " + fn_name);
      if (positional.size() > n_slots) fail(std::string("too many arguments for ") + fn_name);
    };

    if (fn == "constant" || fn == "const") {
      auto v = take("value", 0);
      finish(1, "constant");
      return KernelSpec::constant(v ? as_scalar(*v, "value") : 1.0);
    }
    if (fn == "se" || fn == "rbf" || fn == "squared_exponential") {
      auto variance = take("variance", 0);
      auto ell = take("lengthscale", 1);
      finish(2, "se");
      return KernelSpec::squared_exponential(
          variance ? as_scalar(*variance, "variance") : 1.0,
          ell ? as_vector(*ell) : Eigen::VectorXd::Ones(1));
    }
    if (fn == "matern") {
      auto nu = take("nu", 0);
      auto variance = take("variance", 1);
      auto ell = take("lengthscale", 2);
      finish(3, "matern");
      return KernelSpec::matern(nu ? as_scalar(*nu, "nu") : 2.5,
                                variance ? as_scalar(*variance, "variance") : 1.0,
                                ell ? as_vector(*ell) : Eigen::VectorXd::Ones(1));
    }
    fail("unknown kernel '" + fn + "'");
  }

  KernelSpec factor() {
    if (eat('(')) {
      KernelSpec inner = expr();
      if (!eat(')')) fail("expected ')'");
      return inner;
    }
    return call(name());
  }

  KernelSpec term() {
    KernelSpec k = factor();
    while (eat('*')) k = KernelSpec::product(std::move(k), factor());
    return k;
  }

  KernelSpec expr() {
    KernelSpec k = term();
    while (eat('+')) k = KernelSpec::sum(std::move(k), term());
    return k;
  }
};

}  // namespace

KernelSpec parse_kernel(std::string_view expression) {
  Parser p{expression};
  KernelSpec k = p.expr();
  p.skip_space();
  if (p.pos != expression.size()) p.fail("unexpected trailing input");
  return k;
}

}  // namespace gplccm
