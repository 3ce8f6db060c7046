#include "freezenet/cli.hpp"

#include <algorithm>
#include <ostream>

#include "commands.hpp"

namespace freezenet {

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"FreezeNet training, probing and checkpoint tools", "freezenet"};
  app.require_subcommand(1);
  cli::add_train(app, out, err);
  cli::add_probe(app, out, err);
  cli::add_codec(app, out, err);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
    return exit_ok;
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return exit_ok;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return exit_ok;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return exit_usage;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return exit_usage;
  } catch (const ParameterError& e) {
    err << "usage error: " << e.what() << "\n";
    return exit_usage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return exit_data;
  } catch (const CodecError& e) {
    err << "checkpoint error in section '" << e.section() << "': " << e.what() << "\n";
    return exit_codec;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return exit_numeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_failure;
  }
}

}  // namespace freezenet
