#include <churnsim/cli.hpp>

int main(int argc, char** argv)
{
    return churnsim::cli::run_command(argc, argv);
}
