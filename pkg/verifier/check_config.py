"""
Diagnostic script to check current configuration
"""
import os
from dotenv import load_dotenv

load_dotenv()

from app.config import config  # noqa: E402

print("=" * 60)
print("CONFIGURATION DIAGNOSTIC")
print("=" * 60)

# Output directory
print("\n📁 OUTPUT:")
output_dir = os.environ.get('VERIFIER_OUTPUT_DIR')
print(f"VERIFIER_OUTPUT_DIR: {output_dir or 'NOT SET (will use default: output)'}")
if output_dir and not os.access(os.path.dirname(os.path.abspath(output_dir)), os.W_OK):
    print("❌ Parent of VERIFIER_OUTPUT_DIR is not writable")

# Profiles
for name in ('development', 'production', 'testing'):
    cfg = config[name]
    print(f"\n⚙️ {name.upper()} PROFILE:")
    print(f"Resolution: {cfg.DEFAULT_RESOLUTION} (min {cfg.MIN_RESOLUTION}), engine: {cfg.DEFAULT_ENGINE}")
    print(f"Workers: {cfg.WORKERS}, jet chunk: {cfg.JET_CHUNK_SIZE}, ambient chunk: {cfg.AMBIENT_CHUNK_SIZE}")
    print(f"Log level: {cfg.LOG_LEVEL}, log file: {'ON' if cfg.LOG_TO_FILE else 'OFF'}")

print("\n📏 DEFAULT TOLERANCES:")
base = config['default']
for name, value in sorted(base.TOLERANCES.items()):
    fixed = ' (tighten only)' if name in base.IDENTITY_TOLERANCES else ''
    print(f"  {name}: {value:g}{fixed}")

print("\n✅ All checks complete!")
