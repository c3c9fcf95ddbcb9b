from flask import Flask
from dotenv import load_dotenv
import logging
import os

# Load environment variables from .env file
load_dotenv()

# Setup of key Flask object (app)
app = Flask(__name__)

# Logging, one basicConfig for the whole process
app.config['LOG_LEVEL'] = (os.environ.get('LR_LOG_LEVEL') or 'INFO').upper()
logging.basicConfig(
    level=getattr(logging, app.config['LOG_LEVEL'], logging.INFO),
    format='%(asctime)s %(levelname)s %(name)s: %(message)s',
)

# Numerical settings
app.config['DIMENSION_CAP'] = int(os.environ.get('LR_DIMENSION_CAP') or 4096)  # 12 qubits
app.config['SLACK'] = float(os.environ.get('LR_SLACK') or 1e-10)  # slack on gated inequalities
app.config['SEED'] = int(os.environ.get('LR_SEED') or 0)
app.config['ODE_RTOL'] = float(os.environ.get('LR_ODE_RTOL') or 1e-9)
app.config['ODE_ATOL'] = float(os.environ.get('LR_ODE_ATOL') or 1e-12)

# Report settings
app.config['REPORT_FORMAT'] = os.environ.get('LR_REPORT_FORMAT') or 'both'
app.config['OUTPUT_DIR'] = os.environ.get('LR_OUTPUT_DIR') or os.path.join(app.instance_path, 'reports')

# Data folder for shipped scenario configs
app.config['DATA_FOLDER'] = os.path.join(app.instance_path, 'data')
os.makedirs(app.config['DATA_FOLDER'], exist_ok=True)
