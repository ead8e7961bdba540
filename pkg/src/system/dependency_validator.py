"""
Start-up check for the numerical and configuration libraries.
"""
import importlib
import logging
from typing import Any, Dict, List, Optional


class DependencyValidator:
    """Checks that the required libraries import and are recent enough."""

    REQUIRED_DEPENDENCIES = {
        'numpy': {
            'min_version': '1.22.0',
            'import_name': 'numpy',
            'install_cmd': 'pip install numpy>=1.22',
            'description': 'Array type and matrix products',
        },
        'scipy': {
            'min_version': '1.8.0',
            'import_name': 'scipy',
            'install_cmd': 'pip install scipy>=1.8',
            'description': 'LU and Cholesky factorizations (scipy.linalg, LAPACK)',
        },
        'yaml': {
            'min_version': '6.0',
            'import_name': 'yaml',
            'install_cmd': 'pip install PyYAML>=6.0',
            'description': 'YAML parser for scenario files',
        },
    }

    def __init__(self):
        self.logger = logging.getLogger(__name__)

    def validate_dependencies(self) -> Dict[str, Any]:
        """
        Validate all required dependencies.

        Returns:
            Dict with ``all_available``, ``missing``, ``available``,
            ``version_warnings`` and ``installation_instructions``
        """
        result = {
            'all_available': True,
            'missing': [],
            'available': [],
            'version_warnings': [],
            'installation_instructions': [],
        }

        for dep_name, dep_info in self.REQUIRED_DEPENDENCIES.items():
            validation = self._validate_single_dependency(dep_name, dep_info)
            if validation['available']:
                result['available'].append({'name': dep_name, 'version': validation['version']})
                if validation['version_warning']:
                    result['version_warnings'].append(validation['version_warning'])
            else:
                result['missing'].append({
                    'name': dep_name,
                    'description': dep_info['description'],
                    'install_cmd': dep_info['install_cmd'],
                })
                result['all_available'] = False

        result['installation_instructions'] = self._generate_installation_instructions(result)
        return result

    def _validate_single_dependency(self, dep_name: str, dep_info: Dict[str, Any]) -> Dict[str, Any]:
        """Validate a single dependency."""
        result = {'available': False, 'version': None, 'version_warning': None}
        try:
            module = importlib.import_module(dep_info['import_name'])
        except ImportError as e:
            self.logger.warning(f"Dependency {dep_name} is not available: {e}")
            return result

        result['available'] = True
        version = self._get_module_version(module)
        result['version'] = version
        if version and self._is_version_older(version, dep_info['min_version']):
            result['version_warning'] = (
                f"{dep_name} version {version} is older than recommended {dep_info['min_version']}. "
                f"Consider upgrading with: {dep_info['install_cmd']}"
            )
        self.logger.debug(f"Dependency {dep_name} is available (version: {version or 'unknown'})")
        return result

    def _get_module_version(self, module: Any) -> Optional[str]:
        version = getattr(module, '__version__', None)
        return str(version) if version is not None else None

    def _is_version_older(self, current: str, minimum: str) -> bool:
        """Compare the numeric prefix of dotted versions; unparsable versions pass."""
        def parts(version: str) -> List[int]:
            numbers = []
            for piece in version.split('.'):
                digits = ''.join(ch for ch in piece if ch.isdigit())
                if not digits:
                    break
                numbers.append(int(digits))
            return numbers

        current_parts, minimum_parts = parts(current), parts(minimum)
        if not current_parts:
            return False
        width = max(len(current_parts), len(minimum_parts))
        current_parts += [0] * (width - len(current_parts))
        minimum_parts += [0] * (width - len(minimum_parts))
        return current_parts < minimum_parts

    def _generate_installation_instructions(self, validation_result: Dict[str, Any]) -> List[str]:
        instructions = []
        if validation_result['missing']:
            instructions.append("REQUIRED DEPENDENCIES MISSING:")
            for dep in validation_result['missing']:
                instructions.append(f"• {dep['name']}: {dep['description']}")
                instructions.append(f"  Install with: {dep['install_cmd']}")
            instructions.append("To install everything at once: pip install -r requirements.txt")
        for warning in validation_result['version_warnings']:
            instructions.append(f"• {warning}")
        return instructions

    def log_dependency_status(self, validation_result: Dict[str, Any]) -> None:
        """Log dependency validation results."""
        if not validation_result['all_available']:
            self.logger.error("DEPENDENCY ERROR: Required dependencies are missing")
            for instruction in validation_result['installation_instructions']:
                self.logger.error(f"  {instruction}")
        else:
            self.logger.info("All dependencies are available")
        for warning in validation_result['version_warnings']:
            self.logger.warning(f"Version warning: {warning}")
