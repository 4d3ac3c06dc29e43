#include "lwfsmc_cli.hpp"

int
main(int argc, char** argv)
{
  return lwfsmc::cli::run(argc, argv);
}
