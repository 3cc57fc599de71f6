import os
import subprocess
import sys

DEFAULT_SPEC = os.path.join("examples_specs", "ball4.json")


def create_venv(python_version):
    # Create a virtual environment named 'venv' using the specified Python version
    subprocess.run([python_version, "-m", "venv", "venv"])


def generate_bash_script():
    # Activate venv, install dependencies, then run the quick suite on the bundled spec
    if os.name == "nt":
        activate_script = "/".join(["venv", "Scripts", "activate"])
        pip_path = "/".join(["venv", "Scripts", "pip"])
        python_path = "/".join(["venv", "Scripts", "python"])
        spec_path = DEFAULT_SPEC.replace("\\", "/")
    else:
        activate_script = os.path.join("venv", "bin", "activate")
        pip_path = os.path.join("venv", "bin", "pip")
        python_path = os.path.join("venv", "bin", "python")
        spec_path = DEFAULT_SPEC

    commands = [
        f"source {activate_script}",
        f"{pip_path} install -r requirements.txt",
        "# Arguments are passed through to the verify command",
        f'{python_path} osb_cli.py verify --spec {spec_path} "$@"',
    ]
    return "\n".join(commands)


def main():
    if len(sys.argv) > 1:
        python_version = sys.argv[1]
    else:
        python_version = sys.executable

    create_venv(python_version)

    with open('start.sh', 'w') as f:
        f.write(generate_bash_script() + "\n")

    print("Setup script written successfully! To start, please run: bash start.sh")


if __name__ == "__main__":
    main()
