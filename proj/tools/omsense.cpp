#include "omsense/cli_app.hpp"

int main(int argc, char **argv) { return omsense::cli::run(argc, argv); }
